#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobhsmm::hsmm {

// Maximal run of one state. Consecutive segments always differ in state.
struct RunSegment {
    int state = 0;
    int duration = 0;
};

std::vector<RunSegment> run_length_encode(std::span<const int> states);
std::vector<int> run_length_decode(std::span<const RunSegment> segments);

struct Emission {
    double mu = 0.0;
    double sigma = 1.0;
};

// Explicit-duration semi-Markov model. The transition matrix has a zero
// diagonal: staying put is expressed through sojourn durations, not
// self-transitions. Sojourn pmfs live on the integer grid 1..dmax
// (sojourn[j][d-1] is the probability of duration d in state j+1).
struct Hsmm {
    int n_states = 0;
    std::vector<double> pi;
    std::vector<std::vector<double>> transition;
    std::vector<Emission> emissions;
    std::vector<std::vector<double>> sojourn;
    int dmax = 0;
    std::vector<bool> defaulted; // states never seen in training data

    void validate() const;
};

struct BuildConfig {
    double transition_smoothing = 0.5;
    int dmax = 0;           // 0: ceil(1.2 x longest observed sojourn)
    double bandwidth = 0.0; // 0: Silverman's rule, floored at 0.5
    double sigma_floor = 1e-4;
};

struct LabeledSequence {
    std::vector<int> states; // 1..S
    std::vector<double> observations;
};

struct BuildResult {
    Hsmm model;
    std::vector<std::string> warnings;
};

BuildResult build_hsmm(std::span<const LabeledSequence> sequences, int n_states,
                       const BuildConfig& config = {});

// h = 0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at 0.5.
double silverman_bandwidth(std::span<const int> durations);

// Gaussian-kernel density evaluated at integers 1..dmax, normalized to a pmf.
// bandwidth <= 0 selects Silverman's rule.
std::vector<double> kde_sojourn(std::span<const int> durations, int dmax, double bandwidth);

struct DecodeResult {
    std::vector<int> states;
    double log_likelihood = 0.0;
};

// Explicit-duration Viterbi in log space, O(T*S*(S+dmax)). Ties resolve to
// the smaller state id, then the shorter final duration.
DecodeResult viterbi(const Hsmm& model, std::span<const double> obs);

struct NextState {
    int state = 0;
    double probability = 0.0;
};

// Top-k successor states of the current state by transition probability,
// ties to the smaller id. Requires 1 <= k <= S-1.
std::vector<NextState> predict_next(const Hsmm& model, int current_state, int k);

// Generative draw of length t_len, deterministic per seed.
LabeledSequence sample(const Hsmm& model, int t_len, std::uint64_t seed);

} // namespace mobhsmm::hsmm
