#include "mobhsmm/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "mobhsmm/csv.hpp"
#include "mobhsmm/error.hpp"
#include "mobhsmm/rng.hpp"

namespace mobhsmm::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_cell(const std::string& cell) { return cell.empty() || cell == "NA"; }

// These characters would make exported rule strings ambiguous to reparse.
void check_token(const std::string& s, const std::string& what) {
    if (s.empty()) throw DataError(what + " must not be empty");
    if (s.find_first_of(",&<>=") != std::string::npos)
        throw DataError(what + " '" + s + "' contains a reserved character (one of ,&<>=)");
    if (s.front() == ' ' || s.back() == ' ')
        throw DataError(what + " '" + s + "' has leading or trailing spaces");
}

} // namespace

unsigned parse_role(std::string_view name) {
    if (name == "subject_id") return static_cast<unsigned>(Role::SubjectId);
    if (name == "time_index") return static_cast<unsigned>(Role::TimeIndex);
    if (name == "outcome") return static_cast<unsigned>(Role::Outcome);
    if (name == "soft_target") return static_cast<unsigned>(Role::SoftTarget);
    if (name == "partition_var") return static_cast<unsigned>(Role::PartitionVar);
    if (name == "leaf_regressor") return static_cast<unsigned>(Role::LeafRegressor);
    if (name == "accumulated") return static_cast<unsigned>(Role::Accumulated);
    if (name == "carried") return static_cast<unsigned>(Role::Carried);
    throw DataError("unknown column role: '" + std::string(name) + "'");
}

std::string role_names(unsigned roles) {
    static const std::pair<Role, const char*> table[] = {
        {Role::SubjectId, "subject_id"},   {Role::TimeIndex, "time_index"},
        {Role::Outcome, "outcome"},        {Role::SoftTarget, "soft_target"},
        {Role::PartitionVar, "partition_var"}, {Role::LeafRegressor, "leaf_regressor"},
        {Role::Accumulated, "accumulated"},    {Role::Carried, "carried"},
    };
    std::string out;
    for (const auto& [role, name] : table) {
        if (roles & static_cast<unsigned>(role)) {
            if (!out.empty()) out += "+";
            out += name;
        }
    }
    return out;
}

void Schema::validate() const {
    if (columns.empty()) throw DataError("schema has no columns");
    auto count = [&](Role r) {
        std::size_t n = 0;
        for (const auto& c : columns) n += c.has(r) ? 1 : 0;
        return n;
    };
    for (const auto& c : columns) check_token(c.name, "column name");
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t j = i + 1; j < columns.size(); ++j)
            if (columns[i].name == columns[j].name)
                throw DataError("duplicate column name '" + columns[i].name + "'");

    if (count(Role::SubjectId) != 1) throw DataError("schema needs exactly one subject_id column");
    if (count(Role::TimeIndex) != 1) throw DataError("schema needs exactly one time_index column");
    if (count(Role::Outcome) != 1) throw DataError("schema needs exactly one outcome column");
    if (count(Role::SoftTarget) > 1) throw DataError("schema allows at most one soft_target column");
    if (count(Role::PartitionVar) < 1) throw DataError("schema needs at least one partition_var column");
    if (count(Role::LeafRegressor) < 1) throw DataError("schema needs at least one leaf_regressor column");

    constexpr unsigned core = static_cast<unsigned>(Role::SubjectId) |
                              static_cast<unsigned>(Role::TimeIndex) |
                              static_cast<unsigned>(Role::Outcome) |
                              static_cast<unsigned>(Role::SoftTarget);
    for (const auto& c : columns) {
        if ((c.roles & core) && (c.roles & ~core))
            throw DataError("column '" + c.name + "' mixes core and feature roles");
        if (c.has(Role::Accumulated) && c.has(Role::Carried))
            throw DataError("column '" + c.name + "' cannot be both accumulated and carried");
        if (c.has(Role::Accumulated) && c.kind == Kind::Categorical)
            throw DataError("categorical column '" + c.name + "' cannot be interpolated (accumulated)");
        if (c.has(Role::LeafRegressor) && c.kind == Kind::Categorical)
            throw DataError("leaf_regressor column '" + c.name + "' must be numeric");
    }
}

const ColumnSpec* Schema::find(std::string_view name) const {
    for (const auto& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

const ColumnSpec& Schema::unique(Role r) const {
    for (const auto& c : columns)
        if (c.has(r)) return c;
    throw DataError("schema lacks a column with role " + role_names(static_cast<unsigned>(r)));
}

const ColumnSpec* Schema::optional_unique(Role r) const {
    for (const auto& c : columns)
        if (c.has(r)) return &c;
    return nullptr;
}

std::vector<const ColumnSpec*> Schema::with_role(Role r) const {
    std::vector<const ColumnSpec*> out;
    for (const auto& c : columns)
        if (c.has(r)) out.push_back(&c);
    return out;
}

Schema Schema::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("schema JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array())
        throw DataError("schema JSON must be an object with a 'columns' array");

    Schema schema;
    for (const auto& jc : j["columns"]) {
        ColumnSpec spec;
        if (!jc.contains("name") || !jc["name"].is_string())
            throw DataError("schema column entry lacks a string 'name'");
        spec.name = jc["name"].get<std::string>();
        if (!jc.contains("role")) throw DataError("schema column '" + spec.name + "' lacks 'role'");
        const auto& jr = jc["role"];
        if (jr.is_string()) {
            spec.roles = parse_role(jr.get<std::string>());
        } else if (jr.is_array()) {
            for (const auto& r : jr) spec.roles |= parse_role(r.get<std::string>());
        } else {
            throw DataError("schema column '" + spec.name + "': 'role' must be a string or array");
        }
        std::string kind = jc.value("kind", std::string("numeric"));
        if (kind == "numeric") spec.kind = Kind::Numeric;
        else if (kind == "categorical") spec.kind = Kind::Categorical;
        else throw DataError("schema column '" + spec.name + "': unknown kind '" + kind + "'");
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

Schema Schema::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string Schema::to_json_text() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) {
        nlohmann::json roles = nlohmann::json::array();
        for (unsigned bit = 1; bit <= static_cast<unsigned>(Role::Carried); bit <<= 1)
            if (c.roles & bit) roles.push_back(role_names(bit));
        nlohmann::json jc{{"name", c.name},
                          {"kind", c.kind == Kind::Numeric ? "numeric" : "categorical"}};
        jc["role"] = roles.size() == 1 ? roles[0] : roles;
        cols.push_back(jc);
    }
    return nlohmann::json{{"columns", cols}}.dump(2);
}

std::size_t FeatureColumn::category_code(const std::string& label) {
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == label) return i;
    check_token(label, "category label in column '" + name + "'");
    categories.push_back(label);
    return categories.size() - 1;
}

const FeatureColumn& Dataset::feature(std::string_view name) const {
    for (const auto& f : features)
        if (f.name == name) return f;
    throw DataError("no such column: '" + std::string(name) + "'");
}

FeatureColumn& Dataset::feature(std::string_view name) {
    return const_cast<FeatureColumn&>(static_cast<const Dataset&>(*this).feature(name));
}

bool Dataset::subject_positive(std::size_t subject_index) const {
    const auto& s = subjects[subject_index];
    for (std::size_t i = s.begin; i < s.end; ++i)
        if (outcome[i] == 1) return true;
    return false;
}

std::size_t Dataset::positive_observations() const {
    std::size_t n = 0;
    for (auto o : outcome) n += (o == 1) ? 1 : 0;
    return n;
}

double Dataset::positive_ratio() const {
    if (outcome.empty()) return 0.0;
    return static_cast<double>(positive_observations()) / static_cast<double>(outcome.size());
}

void Dataset::check_invariants() const {
    std::size_t expected = 0;
    for (const auto& s : subjects) {
        if (s.begin != expected || s.end < s.begin)
            throw std::logic_error("dataset subject spans are not contiguous");
        expected = s.end;
        for (std::size_t i = s.begin + 1; i < s.end; ++i)
            if (time[i] <= time[i - 1])
                throw std::logic_error("time index not strictly increasing for subject '" + s.id + "'");
    }
    if (expected != n_rows()) throw std::logic_error("subject spans do not cover all rows");
    for (const auto& f : features)
        if (f.values.size() != n_rows() || f.missing.size() != n_rows())
            throw std::logic_error("feature column '" + f.name + "' has wrong length");
    if (outcome.size() != n_rows()) throw std::logic_error("outcome column has wrong length");
    if (has_soft && (soft.size() != n_rows() || soft_missing.size() != n_rows()))
        throw std::logic_error("soft_target column has wrong length");
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
    schema.validate();
    csv::Table table = csv::read_file(path);

    // Header must carry exactly the schema's columns.
    std::unordered_map<std::string, std::size_t> header_index;
    for (std::size_t i = 0; i < table.header.size(); ++i) header_index[table.header[i]] = i;
    for (const auto& c : schema.columns)
        if (!header_index.count(c.name))
            throw DataError("column '" + c.name + "' missing from CSV header");
    for (const auto& h : table.header)
        if (!schema.find(h)) throw DataError("unexpected column '" + h + "' in CSV header");

    const ColumnSpec& subject_col = schema.unique(Role::SubjectId);
    const ColumnSpec& time_col = schema.unique(Role::TimeIndex);
    const ColumnSpec& outcome_col = schema.unique(Role::Outcome);
    const ColumnSpec* soft_col = schema.optional_unique(Role::SoftTarget);

    Dataset d;
    d.schema = schema;
    d.has_soft = soft_col != nullptr;
    d.provenance = "loaded from " + path.string();
    constexpr unsigned core = static_cast<unsigned>(Role::SubjectId) |
                              static_cast<unsigned>(Role::TimeIndex) |
                              static_cast<unsigned>(Role::Outcome) |
                              static_cast<unsigned>(Role::SoftTarget);
    for (const auto& c : schema.columns) {
        if (c.roles & core) continue;
        FeatureColumn f;
        f.name = c.name;
        f.categorical = c.kind == Kind::Categorical;
        f.roles = c.roles;
        d.features.push_back(std::move(f));
    }

    // Parse in file order, then regroup rows by subject (first appearance
    // order) while keeping each subject's rows in file order.
    const std::size_t n = table.rows.size();
    std::vector<std::string> subject_of(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw DataError("row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                            " cells, expected " + std::to_string(table.header.size()));
        subject_of[r] = row[header_index[subject_col.name]];
        if (subject_of[r].empty())
            throw DataError("empty subject id at row " + std::to_string(r + 2));
    }
    std::vector<std::string> subject_order;
    std::unordered_map<std::string, std::vector<std::size_t>> rows_of;
    for (std::size_t r = 0; r < n; ++r) {
        auto [it, inserted] = rows_of.try_emplace(subject_of[r]);
        if (inserted) subject_order.push_back(subject_of[r]);
        it->second.push_back(r);
    }

    d.time.reserve(n);
    d.outcome.reserve(n);
    if (d.has_soft) {
        d.soft.reserve(n);
        d.soft_missing.reserve(n);
    }
    for (auto& f : d.features) {
        f.values.reserve(n);
        f.missing.reserve(n);
    }

    for (const auto& id : subject_order) {
        SubjectSpan span;
        span.id = id;
        span.begin = d.time.size();
        for (std::size_t r : rows_of[id]) {
            const auto& row = table.rows[r];
            const std::string where = "row " + std::to_string(r + 2);

            std::int64_t t = csv::parse_int(row[header_index[time_col.name]],
                                            where + ", column '" + time_col.name + "'");
            d.time.push_back(t);

            double oc = csv::parse_double(row[header_index[outcome_col.name]],
                                          where + ", column '" + outcome_col.name + "'");
            if (oc != 0.0 && oc != 1.0)
                throw DataError("outcome out of {0,1} at " + where + " (subject '" + id + "')");
            d.outcome.push_back(static_cast<std::int8_t>(oc));

            if (d.has_soft) {
                const std::string& cell = row[header_index[soft_col->name]];
                if (is_missing_cell(cell)) {
                    d.soft.push_back(kNaN);
                    d.soft_missing.push_back(1);
                } else {
                    double v = csv::parse_double(cell, where + ", column '" + soft_col->name + "'");
                    if (v < 0.0 || v > 1.0)
                        throw DataError("soft_target out of [0,1] at " + where + ": " + cell);
                    d.soft.push_back(v);
                    d.soft_missing.push_back(0);
                }
            }

            for (auto& f : d.features) {
                const std::string& cell = row[header_index[f.name]];
                if (is_missing_cell(cell)) {
                    f.values.push_back(kNaN);
                    f.missing.push_back(1);
                } else if (f.categorical) {
                    f.values.push_back(static_cast<double>(f.category_code(cell)));
                    f.missing.push_back(0);
                } else {
                    f.values.push_back(csv::parse_double(cell, where + ", column '" + f.name + "'"));
                    f.missing.push_back(0);
                }
            }
        }
        span.end = d.time.size();
        for (std::size_t i = span.begin + 1; i < span.end; ++i)
            if (d.time[i] <= d.time[i - 1])
                throw DataError("time index not strictly increasing for subject '" + id + "'");
        d.subjects.push_back(std::move(span));
    }
    return d;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d,
                       const std::vector<std::string>& comments) {
    csv::Table table;
    table.comments = comments;
    for (const auto& c : d.schema.columns) table.header.push_back(c.name);

    const ColumnSpec& subject_col = d.schema.unique(Role::SubjectId);
    const ColumnSpec& time_col = d.schema.unique(Role::TimeIndex);
    const ColumnSpec& outcome_col = d.schema.unique(Role::Outcome);
    const ColumnSpec* soft_col = d.schema.optional_unique(Role::SoftTarget);

    table.rows.reserve(d.n_rows());
    for (const auto& s : d.subjects) {
        for (std::size_t i = s.begin; i < s.end; ++i) {
            std::vector<std::string> row;
            row.reserve(table.header.size());
            for (const auto& c : d.schema.columns) {
                if (c.name == subject_col.name) {
                    row.push_back(s.id);
                } else if (c.name == time_col.name) {
                    row.push_back(std::to_string(d.time[i]));
                } else if (c.name == outcome_col.name) {
                    row.push_back(d.outcome[i] ? "1" : "0");
                } else if (soft_col && c.name == soft_col->name) {
                    row.push_back(d.soft_missing[i] ? "" : csv::format_double(d.soft[i]));
                } else {
                    const FeatureColumn& f = d.feature(c.name);
                    if (f.missing[i])
                        row.push_back("");
                    else if (f.categorical)
                        row.push_back(f.categories[static_cast<std::size_t>(f.values[i])]);
                    else
                        row.push_back(csv::format_double(f.values[i]));
                }
            }
            table.rows.push_back(std::move(row));
        }
    }
    csv::write_file(path, table);
}

void impute_locf(std::span<double> values, std::span<std::uint8_t> missing) {
    if (values.empty()) throw DataError("empty series");
    std::size_t first = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!missing[i]) {
            first = i;
            break;
        }
    }
    if (first == values.size()) throw DataError("no observed value to carry");
    for (std::size_t i = 0; i < first; ++i) {
        values[i] = values[first];
        missing[i] = 0;
    }
    double last = values[first];
    for (std::size_t i = first; i < values.size(); ++i) {
        if (missing[i])
            values[i] = last;
        else
            last = values[i];
        missing[i] = 0;
    }
}

void impute_linear(std::span<double> values, std::span<std::uint8_t> missing,
                   std::span<const std::int64_t> t) {
    if (values.empty()) throw DataError("empty series");
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!missing[i]) observed.push_back(i);
    if (observed.empty()) throw DataError("no observed value to interpolate");

    std::size_t seg = 0; // observed[seg] <= current gap < observed[seg+1]
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!missing[i]) continue;
        if (i < observed.front()) {
            values[i] = values[observed.front()];
        } else if (i > observed.back()) {
            values[i] = values[observed.back()];
        } else {
            while (observed[seg + 1] < i) ++seg;
            std::size_t a = observed[seg], b = observed[seg + 1];
            double frac = static_cast<double>(t[i] - t[a]) / static_cast<double>(t[b] - t[a]);
            values[i] = values[a] + frac * (values[b] - values[a]);
        }
        missing[i] = 0;
    }
}

Dataset impute_dataset(const Dataset& d) {
    Dataset out = d;
    for (auto& f : out.features) {
        const bool linear = f.has(Role::Accumulated);
        const bool locf = f.has(Role::Carried);
        if (!linear && !locf) continue;
        for (const auto& s : out.subjects) {
            std::span<double> vals(f.values.data() + s.begin, s.length());
            std::span<std::uint8_t> miss(f.missing.data() + s.begin, s.length());
            try {
                if (linear)
                    impute_linear(vals, miss,
                                  std::span<const std::int64_t>(out.time.data() + s.begin, s.length()));
                else
                    impute_locf(vals, miss);
            } catch (const DataError& e) {
                throw DataError("column '" + f.name + "', subject '" + s.id + "': " + e.what());
            }
        }
    }
    out.provenance = d.provenance + "; imputed";
    return out;
}

Dataset subset_subjects(const Dataset& d, const std::vector<std::size_t>& subject_indices) {
    Dataset out;
    out.schema = d.schema;
    out.has_soft = d.has_soft;
    out.provenance = d.provenance + "; subset";
    for (const auto& f : d.features) {
        FeatureColumn nf;
        nf.name = f.name;
        nf.categorical = f.categorical;
        nf.roles = f.roles;
        nf.categories = f.categories;
        out.features.push_back(std::move(nf));
    }
    for (std::size_t si : subject_indices) {
        const SubjectSpan& s = d.subjects[si];
        SubjectSpan ns{s.id, out.time.size(), out.time.size() + s.length()};
        out.time.insert(out.time.end(), d.time.begin() + s.begin, d.time.begin() + s.end);
        out.outcome.insert(out.outcome.end(), d.outcome.begin() + s.begin, d.outcome.begin() + s.end);
        if (d.has_soft) {
            out.soft.insert(out.soft.end(), d.soft.begin() + s.begin, d.soft.begin() + s.end);
            out.soft_missing.insert(out.soft_missing.end(), d.soft_missing.begin() + s.begin,
                                    d.soft_missing.begin() + s.end);
        }
        for (std::size_t fi = 0; fi < d.features.size(); ++fi) {
            const auto& f = d.features[fi];
            auto& nf = out.features[fi];
            nf.values.insert(nf.values.end(), f.values.begin() + s.begin, f.values.begin() + s.end);
            nf.missing.insert(nf.missing.end(), f.missing.begin() + s.begin, f.missing.begin() + s.end);
        }
        out.subjects.push_back(std::move(ns));
    }
    return out;
}

SplitResult split_subjects(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw DataError("test fraction must lie in (0,1)");
    if (d.subjects.empty()) throw DataError("dataset has no subjects");

    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < d.subjects.size(); ++i)
        (d.subject_positive(i) ? positives : negatives).push_back(i);
    if (positives.empty() || negatives.empty())
        throw DataError("stratified split needs at least one subject in each outcome stratum");

    SplitResult result;
    std::vector<std::size_t> test_set, train_set;
    Rng rng(seed);
    auto assign = [&](std::vector<std::size_t>& stratum, const char* label) {
        const std::size_t size = stratum.size();
        if (size == 1) {
            result.warnings.push_back(std::string("stratum '") + label +
                                      "' has a single subject; assigned to train");
            train_set.push_back(stratum[0]);
            return;
        }
        auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(size)));
        if (k == 0 || k == size)
            result.warnings.push_back(std::string("stratum '") + label + "' receives zero subjects in " +
                                      (k == 0 ? "test" : "train"));
        rng.shuffle(stratum);
        for (std::size_t i = 0; i < size; ++i)
            (i < k ? test_set : train_set).push_back(stratum[i]);
    };
    assign(positives, "positive");
    assign(negatives, "negative");

    std::sort(train_set.begin(), train_set.end());
    std::sort(test_set.begin(), test_set.end());
    result.train = subset_subjects(d, train_set);
    result.test = subset_subjects(d, test_set);
    result.train.provenance = d.provenance + "; train split";
    result.test.provenance = d.provenance + "; test split";
    return result;
}

namespace {

// Appends rows [begin,end) of subject s to dst under a new id.
void append_window(Dataset& dst, const Dataset& src, const SubjectSpan& s, std::size_t begin,
                   const std::string& new_id) {
    SubjectSpan ns{new_id, dst.time.size(), dst.time.size() + (s.end - begin)};
    dst.time.insert(dst.time.end(), src.time.begin() + begin, src.time.begin() + s.end);
    dst.outcome.insert(dst.outcome.end(), src.outcome.begin() + begin, src.outcome.begin() + s.end);
    if (src.has_soft) {
        dst.soft.insert(dst.soft.end(), src.soft.begin() + begin, src.soft.begin() + s.end);
        dst.soft_missing.insert(dst.soft_missing.end(), src.soft_missing.begin() + begin,
                                src.soft_missing.begin() + s.end);
    }
    for (std::size_t fi = 0; fi < src.features.size(); ++fi) {
        const auto& f = src.features[fi];
        auto& nf = dst.features[fi];
        nf.values.insert(nf.values.end(), f.values.begin() + begin, f.values.begin() + s.end);
        nf.missing.insert(nf.missing.end(), f.missing.begin() + begin, f.missing.begin() + s.end);
    }
    dst.subjects.push_back(std::move(ns));
}

} // namespace

OversampleResult oversample_crops(const Dataset& d, double target_positive_ratio,
                                  int max_copies_per_subject, std::uint64_t seed) {
    if (!(target_positive_ratio > 0.0 && target_positive_ratio < 1.0))
        throw DataError("target positive ratio must lie in (0,1)");
    if (max_copies_per_subject < 0) throw DataError("max copies per subject must be >= 0");
    if (d.positive_observations() == 0)
        throw DataError("cannot oversample: dataset has no positive observation");

    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < d.subjects.size(); ++i)
        if (d.subject_positive(i)) positives.push_back(i);

    OversampleResult result;
    result.data = d;
    result.data.provenance = d.provenance + "; oversampled";

    std::size_t pos = d.positive_observations();
    std::size_t total = d.n_rows();
    auto ratio = [&] { return static_cast<double>(pos) / static_cast<double>(total); };

    Rng rng(seed);
    bool reached = ratio() >= target_positive_ratio;
    for (int k = 1; k <= max_copies_per_subject && !reached; ++k) {
        for (std::size_t si : positives) {
            if (ratio() >= target_positive_ratio) {
                reached = true;
                break;
            }
            const SubjectSpan& s = d.subjects[si];
            const std::size_t len = s.length();
            const std::size_t lo = std::min<std::size_t>(2, len);
            const auto crop = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(len)));
            const std::size_t begin = s.end - crop;
            append_window(result.data, d, s, begin, s.id + "#" + std::to_string(k));
            for (std::size_t i = begin; i < s.end; ++i) pos += (d.outcome[i] == 1) ? 1 : 0;
            total += crop;
        }
    }
    result.target_reached = reached || ratio() >= target_positive_ratio;
    if (!result.target_reached)
        result.warnings.push_back("target positive ratio " + csv::format_double(target_positive_ratio) +
                                  " not reached (achieved " + csv::format_double(ratio()) +
                                  "); max copies per subject exhausted");
    return result;
}

} // namespace mobhsmm::data
