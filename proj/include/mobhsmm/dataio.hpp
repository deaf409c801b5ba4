#pragma once

// Sequence dataset handling: schema-validated CSV loading, per-subject
// imputation, subject-stratified splitting, and minority oversampling by
// suffix cropping. Datasets are immutable once built; every operation
// returns a new value.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mobhsmm::data {

enum class Role : unsigned {
    SubjectId = 1u << 0,
    TimeIndex = 1u << 1,
    Outcome = 1u << 2,
    SoftTarget = 1u << 3,
    PartitionVar = 1u << 4,
    LeafRegressor = 1u << 5,
    Accumulated = 1u << 6, // imputation hint: linear interpolation
    Carried = 1u << 7,     // imputation hint: last observation carried forward
};

enum class Kind { Numeric, Categorical };

struct ColumnSpec {
    std::string name;
    unsigned roles = 0;
    Kind kind = Kind::Numeric;

    bool has(Role r) const { return (roles & static_cast<unsigned>(r)) != 0; }
};

unsigned parse_role(std::string_view name);
std::string role_names(unsigned roles);

struct Schema {
    std::vector<ColumnSpec> columns;

    // Enforces: exactly one subject_id/time_index/outcome, at most one
    // soft_target, at least one partition_var and one leaf_regressor,
    // well-formed names. Throws DataError.
    void validate() const;

    const ColumnSpec* find(std::string_view name) const;
    const ColumnSpec& unique(Role r) const;
    const ColumnSpec* optional_unique(Role r) const;
    std::vector<const ColumnSpec*> with_role(Role r) const;

    static Schema from_json_file(const std::filesystem::path& path);
    static Schema from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// One modeling/imputation column, dense over all rows. Categorical values
// are codes into `categories`; missing cells are NaN with the flag set.
struct FeatureColumn {
    std::string name;
    bool categorical = false;
    unsigned roles = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    std::vector<std::string> categories;

    bool has(Role r) const { return (roles & static_cast<unsigned>(r)) != 0; }
    std::size_t category_code(const std::string& label); // interns
};

struct SubjectSpan {
    std::string id;
    std::size_t begin = 0;
    std::size_t end = 0; // half-open row range

    std::size_t length() const { return end - begin; }
};

struct Dataset {
    Schema schema;
    std::vector<SubjectSpan> subjects; // contiguous, in first-appearance order
    std::vector<std::int64_t> time;    // strictly increasing within a subject
    std::vector<std::int8_t> outcome;  // 0/1
    bool has_soft = false;
    std::vector<double> soft;               // NaN where missing
    std::vector<std::uint8_t> soft_missing; // parallel to soft
    std::vector<FeatureColumn> features;    // schema order, core columns excluded
    std::string provenance;

    std::size_t n_rows() const { return time.size(); }
    const FeatureColumn& feature(std::string_view name) const;
    FeatureColumn& feature(std::string_view name);
    bool subject_positive(std::size_t subject_index) const; // any outcome == 1
    std::size_t positive_observations() const;
    double positive_ratio() const;

    // Internal consistency; throws std::logic_error on violation.
    void check_invariants() const;
};

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema);

// Writes header + one row per observation; `comments` become leading '#'
// metadata lines our loader skips.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& d,
                       const std::vector<std::string>& comments = {});

// --- imputation primitives (one subject's series) ---

// Missing values take the most recent observed value; leading gaps are
// back-filled from the first observed value. Throws DataError when the
// whole series is missing.
void impute_locf(std::span<double> values, std::span<std::uint8_t> missing);

// Interior gaps are linearly interpolated in t; boundary gaps take the
// nearest observed value. Throws DataError when the whole series is missing.
void impute_linear(std::span<double> values, std::span<std::uint8_t> missing,
                   std::span<const std::int64_t> t);

// Applies impute_linear to `accumulated` columns and impute_locf to
// `carried` columns, per subject. Error messages name column and subject.
Dataset impute_dataset(const Dataset& d);

// --- splitting and oversampling ---

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::string> warnings;
};

// Subject-level split, stratified on subject outcome (positive iff any
// observation is positive). round(test_fraction * stratum size) subjects go
// to test, drawn by seeded shuffle; deterministic per seed.
SplitResult split_subjects(const Dataset& d, double test_fraction, std::uint64_t seed);

struct OversampleResult {
    Dataset data;
    bool target_reached = true;
    std::vector<std::string> warnings;
};

// Appends suffix-aligned crops of positive subjects' sequences (random
// length, uniform on [min(2,L), L]) until the observation-level positive
// ratio reaches the target or every subject has max_copies_per_subject
// copies. Copies get ids "<orig>#k".
OversampleResult oversample_crops(const Dataset& d, double target_positive_ratio,
                                  int max_copies_per_subject, std::uint64_t seed);

// Dataset with the given subjects only (row content copied verbatim).
Dataset subset_subjects(const Dataset& d, const std::vector<std::size_t>& subject_indices);

} // namespace mobhsmm::data
