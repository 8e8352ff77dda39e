#include "amlpf/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "amlpf/errors.hpp"

namespace amlpf {

using Json = nlohmann::ordered_json;

namespace {

Json manifest_json(const Manifest& m) {
    Json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash();
    j["config"] = m.config_json.empty() ? Json::object() : Json::parse(m.config_json);
    return j;
}

Json marginal_json(const MarginalTrace& t) {
    Json j;
    j["estimates"] = t.estimates;
    j["log_nc"] = t.log_nc;
    return j;
}

Json filter_json(const FilterOutput& out) {
    Json j;
    j["level"] = out.level;
    j["particles"] = out.particles;
    j["phi_names"] = out.phi_names;
    j["estimates"] = out.estimates;
    j["log_nc"] = out.log_nc;
    j["cumulative_cost"] = out.cumulative_cost;
    j["resample_times"] = out.resample_times();
    j["cost"] = out.cost;
    return j;
}

Json coupled_json(const CoupledFilterOutput& out) {
    Json j;
    j["level"] = out.level;
    j["particles"] = out.particles;
    j["antithetic"] = out.antithetic;
    j["phi_names"] = out.phi_names;
    j["fine"] = marginal_json(out.fine);
    j["coarse"] = marginal_json(out.coarse);
    if (out.antithetic) j["anti"] = marginal_json(out.anti);
    j["differences"] = out.differences;
    j["cumulative_cost"] = out.cumulative_cost;
    j["resample_times"] = out.resample_times();
    j["cost"] = out.cost;
    return j;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

// Non-comment, non-empty lines.
std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(line);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("io", "cannot parse " + what + " value '" + s + "'");
    }
}

}  // namespace

std::string Manifest::config_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_json) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string Manifest::csv_header() const {
    std::string s = "# amlpf " + version + " seed=" + std::to_string(seed) +
                    " config_hash=" + config_hash() + "\n";
    if (!config_json.empty()) s += "# config=" + config_json + "\n";
    return s;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string filter_output_csv(const FilterOutput& out, const Manifest& manifest) {
    std::string s = manifest.csv_header();
    s += "k,phi_name,estimate,log_nc,cumulative_cost,resampled\n";
    for (std::size_t t = 0; t < out.horizon(); ++t) {
        for (std::size_t p = 0; p < out.phi_names.size(); ++p) {
            s += std::to_string(t + 1) + "," + out.phi_names[p] + "," +
                 format_double(out.estimates[t][p]) + "," + format_double(out.log_nc[t]) + "," +
                 std::to_string(out.cumulative_cost[t]) + "," + (out.resampled[t] ? "1" : "0") +
                 "\n";
        }
    }
    return s;
}

std::string filter_output_json(const FilterOutput& out, const Manifest& manifest) {
    Json j;
    j["manifest"] = manifest_json(manifest);
    j["filter"] = filter_json(out);
    return j.dump(2) + "\n";
}

std::string coupled_output_csv(const CoupledFilterOutput& out, const Manifest& manifest) {
    std::string s = manifest.csv_header();
    s += "k,phi_name,fine,coarse,anti,difference,log_nc_fine,log_nc_coarse,log_nc_anti,"
         "cumulative_cost,resampled\n";
    for (std::size_t t = 0; t < out.horizon(); ++t) {
        for (std::size_t p = 0; p < out.phi_names.size(); ++p) {
            const std::string anti = out.antithetic ? format_double(out.anti.estimates[t][p]) : "";
            const std::string anti_nc = out.antithetic ? format_double(out.anti.log_nc[t]) : "";
            s += std::to_string(t + 1) + "," + out.phi_names[p] + "," +
                 format_double(out.fine.estimates[t][p]) + "," +
                 format_double(out.coarse.estimates[t][p]) + "," + anti + "," +
                 format_double(out.differences[t][p]) + "," + format_double(out.fine.log_nc[t]) +
                 "," + format_double(out.coarse.log_nc[t]) + "," + anti_nc + "," +
                 std::to_string(out.cumulative_cost[t]) + "," + (out.resampled[t] ? "1" : "0") +
                 "\n";
        }
    }
    return s;
}

std::string coupled_output_json(const CoupledFilterOutput& out, const Manifest& manifest) {
    Json j;
    j["manifest"] = manifest_json(manifest);
    j["coupled"] = coupled_json(out);
    return j.dump(2) + "\n";
}

std::string ml_output_csv(const MLOutput& out, const Manifest& manifest) {
    std::string s = manifest.csv_header();
    s += "k,phi_name,estimate,nc_sign,log_abs_nc,total_cost\n";
    for (std::size_t t = 0; t < out.horizon(); ++t) {
        for (std::size_t p = 0; p < out.phi_names.size(); ++p) {
            s += std::to_string(t + 1) + "," + out.phi_names[p] + "," +
                 format_double(out.combined[t][p]) + "," +
                 std::to_string(out.combined_nc[t].sign) + "," +
                 format_double(out.combined_nc[t].log_abs) + "," +
                 std::to_string(out.total_cost) + "\n";
        }
    }
    return s;
}

std::string ml_output_json(const MLOutput& out, const Manifest& manifest) {
    Json j;
    j["manifest"] = manifest_json(manifest);
    j["method"] = to_string(out.method);
    j["min_level"] = out.config.min_level;
    j["max_level"] = out.config.max_level;
    j["particle_counts"] = out.config.particle_counts;
    j["base"] = filter_json(out.base);
    Json levels = Json::array();
    for (const auto& lvl : out.levels) levels.push_back(coupled_json(lvl));
    j["levels"] = levels;
    Json combined;
    combined["phi_names"] = out.phi_names;
    combined["estimates"] = out.combined;
    Json nc = Json::array();
    for (const auto& v : out.combined_nc) nc.push_back({{"sign", v.sign}, {"log_abs", v.log_abs}});
    combined["nc"] = nc;
    combined["total_cost"] = out.total_cost;
    j["combined"] = combined;
    return j.dump(2) + "\n";
}

std::string bench_records_csv(const std::vector<BenchRecord>& records, const Manifest& manifest) {
    std::string s = manifest.csv_header();
    s += "method,model,target,budget_index,mse,cost,repeats,L_min,L_max,variance,bias_sq,epsilon\n";
    for (const auto& r : records) {
        s += to_string(r.method) + "," + r.model + "," + to_string(r.target) + "," +
             std::to_string(r.budget_index) + "," + format_double(r.mse) + "," +
             format_double(r.cost) + "," + std::to_string(r.repeats) + "," +
             std::to_string(r.min_level) + "," + std::to_string(r.max_level) + "," +
             format_double(r.variance) + "," + format_double(r.bias_sq) + "," +
             format_double(r.epsilon) + "\n";
    }
    return s;
}

std::vector<BenchRecord> parse_bench_records_csv(const std::string& text) {
    const auto lines = data_lines(text);
    if (lines.empty()) throw UsageError("io", "bench CSV has no header");
    const auto header = split(lines[0], ',');
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required : {"method", "model", "target", "mse", "cost"}) {
        if (!col.contains(required)) {
            throw UsageError("io", std::string("bench CSV lacks column ") + required);
        }
    }
    auto get = [&](const std::vector<std::string>& cells, const std::string& name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= cells.size()) return {};
        return cells[it->second];
    };
    std::vector<BenchRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        BenchRecord r;
        r.method = method_from_string(get(cells, "method"));
        r.model = get(cells, "model");
        r.target = target_from_string(get(cells, "target"));
        r.mse = parse_double(get(cells, "mse"), "mse");
        r.cost = parse_double(get(cells, "cost"), "cost");
        if (auto v = get(cells, "budget_index"); !v.empty()) r.budget_index = std::stoi(v);
        if (auto v = get(cells, "repeats"); !v.empty()) r.repeats = std::stoul(v);
        if (auto v = get(cells, "L_min"); !v.empty()) r.min_level = std::stoi(v);
        if (auto v = get(cells, "L_max"); !v.empty()) r.max_level = std::stoi(v);
        if (auto v = get(cells, "variance"); !v.empty()) r.variance = parse_double(v, "variance");
        if (auto v = get(cells, "bias_sq"); !v.empty()) r.bias_sq = parse_double(v, "bias_sq");
        if (auto v = get(cells, "epsilon"); !v.empty()) r.epsilon = parse_double(v, "epsilon");
        out.push_back(std::move(r));
    }
    return out;
}

std::string rates_json(const std::vector<BenchRecord>& records, const Manifest& manifest) {
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<BenchRecord>> groups;
    for (const auto& r : records) {
        groups[{r.model, to_string(r.method), to_string(r.target)}].push_back(r);
    }
    Json rates = Json::object();
    for (const auto& [key, recs] : groups) {
        const auto& [model, method, target] = key;
        if (recs.size() < 3) continue;
        const RateFit fit = fit_rate(recs);
        rates[model][method + "_" + target] = {{"method", method},
                                               {"target", target},
                                               {"slope", fit.slope},
                                               {"standard_error", fit.standard_error},
                                               {"intercept", fit.intercept},
                                               {"points", fit.points}};
    }
    Json j;
    j["manifest"] = manifest_json(manifest);
    j["regression"] = "log10(cost) on log10(mse)";
    j["rates"] = rates;
    return j.dump(2) + "\n";
}

std::string dataset_csv(const Dataset& data, const Manifest& manifest) {
    std::string s = manifest.csv_header();
    const std::size_t q = data.observations.obs_dim;
    const std::size_t d = data.latent.empty() ? 0 : data.latent.front().size();
    s += "k";
    for (std::size_t i = 1; i <= q; ++i) s += ",y_" + std::to_string(i);
    for (std::size_t i = 1; i <= d; ++i) s += ",x_" + std::to_string(i);
    s += "\n";
    for (std::size_t t = 0; t < data.observations.size(); ++t) {
        s += std::to_string(t + 1);
        for (double y : data.observations[t]) s += "," + format_double(y);
        if (d > 0) {
            for (double x : data.latent[t]) s += "," + format_double(x);
        }
        s += "\n";
    }
    return s;
}

Dataset parse_dataset_csv(const std::string& text) {
    const auto lines = data_lines(text);
    if (lines.empty()) throw UsageError("io", "dataset CSV has no header");
    const auto header = split(lines[0], ',');
    if (header.empty() || header[0] != "k") throw UsageError("io", "dataset CSV must start with k");
    std::size_t q = 0, d = 0;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("y_", 0) == 0) {
            ++q;
        } else if (header[i].rfind("x_", 0) == 0) {
            ++d;
        } else {
            throw UsageError("io", "unexpected dataset column " + header[i]);
        }
    }
    if (q == 0) throw UsageError("io", "dataset CSV has no observation columns");
    Dataset data;
    data.observations.obs_dim = q;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        if (cells.size() != 1 + q + d) {
            throw UsageError("io", "dataset row " + std::to_string(i) + " has wrong width");
        }
        if (std::stoul(cells[0]) != i) throw UsageError("io", "dataset rows must be k = 1, 2, ...");
        std::vector<double> y(q);
        for (std::size_t c = 0; c < q; ++c) y[c] = parse_double(cells[1 + c], "observation");
        data.observations.push_back(y);
        if (d > 0) {
            Vector x(d);
            for (std::size_t c = 0; c < d; ++c) x[c] = parse_double(cells[1 + q + c], "state");
            data.latent.push_back(std::move(x));
        }
    }
    if (data.observations.size() == 0) throw UsageError("io", "dataset has no rows");
    return data;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("io", "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io.write", "cannot write " + path);
    out << content;
    if (!out) throw Error("io.write", "failed writing " + path);
}

}  // namespace amlpf
