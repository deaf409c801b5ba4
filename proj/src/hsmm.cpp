#include "mobhsmm/hsmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mobhsmm/error.hpp"
#include "mobhsmm/kernels.hpp"
#include "mobhsmm/rng.hpp"

namespace mobhsmm::hsmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kStochasticTol = 1e-9;

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

void check_pmf(std::span<const double> pmf, const std::string& what) {
    double total = 0.0;
    for (double v : pmf) {
        if (std::isnan(v) || v < 0.0) throw DataError(what + " has a negative or NaN entry");
        total += v;
    }
    if (std::abs(total - 1.0) > kStochasticTol)
        throw DataError(what + " sums to " + std::to_string(total) + ", expected 1");
}

} // namespace

std::vector<RunSegment> run_length_encode(std::span<const int> states) {
    if (states.empty()) throw DataError("cannot run-length encode an empty sequence");
    std::vector<RunSegment> segments;
    segments.push_back({states[0], 1});
    for (std::size_t i = 1; i < states.size(); ++i) {
        if (states[i] == segments.back().state)
            ++segments.back().duration;
        else
            segments.push_back({states[i], 1});
    }
    return segments;
}

std::vector<int> run_length_decode(std::span<const RunSegment> segments) {
    std::vector<int> states;
    for (const auto& seg : segments) {
        if (seg.duration < 1) throw DataError("segment duration must be positive");
        states.insert(states.end(), static_cast<std::size_t>(seg.duration), seg.state);
    }
    return states;
}

void Hsmm::validate() const {
    if (n_states < 1) throw DataError("model must have at least one state");
    const auto s = static_cast<std::size_t>(n_states);
    if (pi.size() != s || transition.size() != s || emissions.size() != s || sojourn.size() != s)
        throw DataError("model arrays disagree with the state count");
    if (dmax < 1) throw DataError("dmax must be at least 1");
    check_pmf(pi, "initial distribution");
    for (std::size_t i = 0; i < s; ++i) {
        if (transition[i].size() != s) throw DataError("transition matrix is not square");
        if (transition[i][i] != 0.0)
            throw DataError("transition diagonal must be exactly zero (state " +
                            std::to_string(i + 1) + ")");
        if (n_states > 1) check_pmf(transition[i], "transition row " + std::to_string(i + 1));
        if (sojourn[i].size() != static_cast<std::size_t>(dmax))
            throw DataError("sojourn pmf length disagrees with dmax");
        check_pmf(sojourn[i], "sojourn pmf for state " + std::to_string(i + 1));
        if (!(emissions[i].sigma >= 1e-4))
            throw DataError("emission sigma below floor in state " + std::to_string(i + 1));
    }
}

double silverman_bandwidth(std::span<const int> durations) {
    const std::size_t n = durations.size();
    if (n == 0) throw DataError("bandwidth of an empty duration list");
    std::vector<double> d(durations.begin(), durations.end());
    double mean = kernels::sum(d.data(), n) / static_cast<double>(n);
    double sd = n > 1 ? std::sqrt(kernels::sq_dev_sum(d.data(), n, mean) / static_cast<double>(n - 1))
                      : 0.0;
    std::sort(d.begin(), d.end());
    auto quantile = [&](double p) {
        double pos = p * static_cast<double>(n - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        return lo + 1 < n ? d[lo] + frac * (d[lo + 1] - d[lo]) : d[lo];
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(n), -0.2);
    return std::max(h, 0.5);
}

std::vector<double> kde_sojourn(std::span<const int> durations, int dmax, double bandwidth) {
    if (durations.empty()) throw DataError("cannot estimate a sojourn pmf without durations");
    if (dmax < 1) throw DataError("dmax must be at least 1");
    int longest = *std::max_element(durations.begin(), durations.end());
    if (longest < 1) throw DataError("durations must be positive");
    if (dmax < longest)
        throw DataError("dmax " + std::to_string(dmax) + " is below the longest duration " +
                        std::to_string(longest));
    double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(durations);

    std::vector<double> pmf(static_cast<std::size_t>(dmax), 0.0);
    for (int d = 1; d <= dmax; ++d) {
        double f = 0.0;
        for (int di : durations) {
            double z = (static_cast<double>(d) - static_cast<double>(di)) / h;
            f += std::exp(-0.5 * z * z);
        }
        pmf[static_cast<std::size_t>(d - 1)] = f;
    }
    double total = kernels::sum(pmf.data(), pmf.size());
    if (!(total > 0.0)) throw DataError("sojourn density vanished on the duration grid");
    for (auto& v : pmf) v /= total;
    return pmf;
}

BuildResult build_hsmm(std::span<const LabeledSequence> sequences, int n_states,
                       const BuildConfig& config) {
    if (n_states < 1) throw DataError("state count must be positive");
    if (sequences.empty()) throw DataError("no training sequences");
    if (config.transition_smoothing < 0.0) throw DataError("transition smoothing must be >= 0");
    if (!(config.sigma_floor > 0.0)) throw DataError("sigma floor must be positive");

    const auto s = static_cast<std::size_t>(n_states);
    std::vector<double> first_counts(s, 0.0);
    std::vector<std::vector<double>> trans_counts(s, std::vector<double>(s, 0.0));
    std::vector<std::vector<int>> durations(s);
    std::vector<std::vector<double>> values(s);
    std::vector<double> pool;
    int longest = 0;

    for (const auto& seq : sequences) {
        if (seq.states.empty()) throw DataError("empty sequence in training data");
        if (seq.states.size() != seq.observations.size())
            throw DataError("state and observation tracks differ in length");
        for (std::size_t t = 0; t < seq.states.size(); ++t) {
            int st = seq.states[t];
            if (st < 1 || st > n_states)
                throw DataError("state id " + std::to_string(st) + " outside 1.." +
                                std::to_string(n_states));
            double x = seq.observations[t];
            if (std::isnan(x)) throw DataError("observation is NaN");
            values[static_cast<std::size_t>(st - 1)].push_back(x);
            pool.push_back(x);
        }
        auto segments = run_length_encode(seq.states);
        first_counts[static_cast<std::size_t>(segments.front().state - 1)] += 1.0;
        for (std::size_t g = 0; g < segments.size(); ++g) {
            const auto& seg = segments[g];
            durations[static_cast<std::size_t>(seg.state - 1)].push_back(seg.duration);
            longest = std::max(longest, seg.duration);
            if (g + 1 < segments.size())
                trans_counts[static_cast<std::size_t>(seg.state - 1)]
                            [static_cast<std::size_t>(segments[g + 1].state - 1)] += 1.0;
        }
    }

    int dmax = config.dmax;
    if (dmax <= 0) dmax = static_cast<int>(std::ceil(1.2 * static_cast<double>(longest)));
    if (dmax < longest)
        throw DataError("dmax " + std::to_string(dmax) + " is below the longest observed sojourn " +
                        std::to_string(longest));

    BuildResult result;
    Hsmm& m = result.model;
    m.n_states = n_states;
    m.dmax = dmax;
    m.defaulted.assign(s, false);
    m.pi.assign(s, 0.0);
    m.transition.assign(s, std::vector<double>(s, 0.0));
    m.emissions.assign(s, {});
    m.sojourn.assign(s, {});

    const double lambda = config.transition_smoothing;
    double pi_total = 0.0;
    for (std::size_t i = 0; i < s; ++i) pi_total += first_counts[i] + lambda;
    for (std::size_t i = 0; i < s; ++i) m.pi[i] = (first_counts[i] + lambda) / pi_total;

    double pool_mean = kernels::sum(pool.data(), pool.size()) / static_cast<double>(pool.size());
    double pool_sd = pool.size() > 1
                         ? std::sqrt(kernels::sq_dev_sum(pool.data(), pool.size(), pool_mean) /
                                     static_cast<double>(pool.size() - 1))
                         : 0.0;

    for (std::size_t i = 0; i < s; ++i) {
        const bool visited = !values[i].empty();
        if (!visited) {
            m.defaulted[i] = true;
            result.warnings.push_back("state " + std::to_string(i + 1) +
                                      " never observed; using pooled emission, uniform "
                                      "transitions and uniform sojourn");
        }

        if (n_states > 1) {
            double denom = 0.0;
            for (std::size_t j = 0; j < s; ++j)
                if (j != i) denom += trans_counts[i][j] + lambda;
            if (visited && denom > 0.0) {
                for (std::size_t j = 0; j < s; ++j)
                    if (j != i) m.transition[i][j] = (trans_counts[i][j] + lambda) / denom;
            } else {
                for (std::size_t j = 0; j < s; ++j)
                    if (j != i) m.transition[i][j] = 1.0 / static_cast<double>(n_states - 1);
                if (visited)
                    result.warnings.push_back("state " + std::to_string(i + 1) +
                                              " has no outgoing transitions; uniform row");
            }
        }

        if (visited) {
            const auto& v = values[i];
            double mean = kernels::sum(v.data(), v.size()) / static_cast<double>(v.size());
            double sd = v.size() > 1
                            ? std::sqrt(kernels::sq_dev_sum(v.data(), v.size(), mean) /
                                        static_cast<double>(v.size() - 1))
                            : 0.0;
            m.emissions[i] = {mean, std::max(sd, config.sigma_floor)};
            m.sojourn[i] = kde_sojourn(durations[i], dmax, config.bandwidth);
        } else {
            m.emissions[i] = {pool_mean, std::max(pool_sd, config.sigma_floor)};
            m.sojourn[i].assign(static_cast<std::size_t>(dmax), 1.0 / static_cast<double>(dmax));
        }
    }

    m.validate();
    return result;
}

DecodeResult viterbi(const Hsmm& model, std::span<const double> obs) {
    model.validate();
    const std::size_t t_len = obs.size();
    if (t_len == 0) throw DataError("empty observation sequence");
    for (double x : obs)
        if (std::isnan(x)) throw DataError("observation is NaN");
    const auto s = static_cast<std::size_t>(model.n_states);
    const auto dmax = static_cast<std::size_t>(model.dmax);
    if (model.n_states == 1 && t_len > dmax)
        throw DataError("sequence exceeds maximal sojourn");

    std::vector<double> ln_pi(s), ln_a(s * s);
    std::vector<std::vector<double>> ln_soj(s, std::vector<double>(dmax));
    for (std::size_t j = 0; j < s; ++j) {
        ln_pi[j] = safe_log(model.pi[j]);
        for (std::size_t i = 0; i < s; ++i) ln_a[i * s + j] = safe_log(model.transition[i][j]);
        for (std::size_t d = 0; d < dmax; ++d) ln_soj[j][d] = safe_log(model.sojourn[j][d]);
    }

    // Emission log-likelihood prefix sums: segment (t-d, t] costs
    // prefix[j][t] - prefix[j][t-d].
    std::vector<std::vector<double>> prefix(s, std::vector<double>(t_len + 1, 0.0));
    {
        std::vector<double> loglik(t_len);
        for (std::size_t j = 0; j < s; ++j) {
            kernels::gaussian_loglik(obs.data(), t_len, model.emissions[j].mu,
                                     model.emissions[j].sigma, loglik.data());
            for (std::size_t t = 0; t < t_len; ++t) prefix[j][t + 1] = prefix[j][t] + loglik[t];
        }
    }

    // delta[t][j]: best score of segmentations of obs[0,t) whose last segment
    // is state j ending at t. incoming[t][j] pre-maximizes over predecessors.
    std::vector<std::vector<double>> delta(t_len + 1, std::vector<double>(s, kNegInf));
    std::vector<std::vector<double>> incoming(t_len + 1, std::vector<double>(s, kNegInf));
    std::vector<std::vector<int>> from_state(t_len + 1, std::vector<int>(s, -1));
    std::vector<std::vector<int>> seg_len(t_len + 1, std::vector<int>(s, 0));
    std::vector<std::vector<int>> seg_prev(t_len + 1, std::vector<int>(s, -1));

    for (std::size_t t = 1; t <= t_len; ++t) {
        for (std::size_t j = 0; j < s; ++j) {
            double best = kNegInf;
            int best_d = 0, best_prev = -1;
            const std::size_t d_hi = std::min<std::size_t>(t, dmax);
            for (std::size_t d = 1; d <= d_hi; ++d) {
                double dur_term = ln_soj[j][d - 1];
                if (dur_term == kNegInf) continue;
                const std::size_t tau = t - d;
                double enter;
                int prev;
                if (tau == 0) {
                    enter = ln_pi[j];
                    prev = -1;
                } else {
                    enter = incoming[tau][j];
                    prev = from_state[tau][j];
                }
                if (enter == kNegInf) continue;
                double score = enter + dur_term + (prefix[j][t] - prefix[j][tau]);
                if (score > best) {
                    best = score;
                    best_d = static_cast<int>(d);
                    best_prev = prev;
                }
            }
            delta[t][j] = best;
            seg_len[t][j] = best_d;
            seg_prev[t][j] = best_prev;
        }
        if (t < t_len) {
            for (std::size_t j = 0; j < s; ++j) {
                double best = kNegInf;
                int arg = -1;
                for (std::size_t i = 0; i < s; ++i) {
                    if (i == j) continue;
                    double v = delta[t][i] + ln_a[i * s + j];
                    if (v > best) {
                        best = v;
                        arg = static_cast<int>(i);
                    }
                }
                incoming[t][j] = best;
                from_state[t][j] = arg;
            }
        }
    }

    std::size_t best_j = 0;
    for (std::size_t j = 1; j < s; ++j)
        if (delta[t_len][j] > delta[t_len][best_j]) best_j = j;
    if (delta[t_len][best_j] == kNegInf)
        throw DataError("no feasible state sequence under the model");

    DecodeResult result;
    result.log_likelihood = delta[t_len][best_j];
    result.states.assign(t_len, 0);
    std::size_t t = t_len;
    int j = static_cast<int>(best_j);
    while (t > 0) {
        int d = seg_len[t][static_cast<std::size_t>(j)];
        int prev = seg_prev[t][static_cast<std::size_t>(j)];
        for (int q = 0; q < d; ++q) result.states[t - 1 - static_cast<std::size_t>(q)] = j + 1;
        t -= static_cast<std::size_t>(d);
        j = prev;
    }
    return result;
}

std::vector<NextState> predict_next(const Hsmm& model, int current_state, int k) {
    model.validate();
    if (current_state < 1 || current_state > model.n_states)
        throw DataError("invalid state " + std::to_string(current_state));
    if (k < 1 || k > model.n_states - 1)
        throw DataError("k must lie in 1.." + std::to_string(model.n_states - 1));
    std::vector<NextState> ranked;
    const auto& row = model.transition[static_cast<std::size_t>(current_state - 1)];
    for (int j = 1; j <= model.n_states; ++j)
        if (j != current_state) ranked.push_back({j, row[static_cast<std::size_t>(j - 1)]});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const NextState& a, const NextState& b) { return a.probability > b.probability; });
    ranked.resize(static_cast<std::size_t>(k));
    return ranked;
}

LabeledSequence sample(const Hsmm& model, int t_len, std::uint64_t seed) {
    model.validate();
    if (t_len < 1) throw DataError("sample length must be positive");
    Rng rng(seed);
    LabeledSequence seq;
    seq.states.reserve(static_cast<std::size_t>(t_len));
    seq.observations.reserve(static_cast<std::size_t>(t_len));

    std::size_t cur = rng.categorical(model.pi);
    while (seq.states.size() < static_cast<std::size_t>(t_len)) {
        int d = static_cast<int>(rng.categorical(model.sojourn[cur])) + 1;
        for (int q = 0; q < d && seq.states.size() < static_cast<std::size_t>(t_len); ++q) {
            seq.states.push_back(static_cast<int>(cur) + 1);
            seq.observations.push_back(
                rng.normal(model.emissions[cur].mu, model.emissions[cur].sigma));
        }
        if (seq.states.size() >= static_cast<std::size_t>(t_len)) break;
        // A single-state model has nowhere to go; draw another sojourn.
        if (model.n_states > 1) cur = rng.categorical(model.transition[cur]);
    }
    return seq;
}

} // namespace mobhsmm::hsmm
