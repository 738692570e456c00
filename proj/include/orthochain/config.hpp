#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orthochain/experiments.hpp"

namespace orthochain {

/// Subcommand names of the command-line tool map onto experiment kinds.
inline ExperimentKind parse_kind_name(std::string_view s) {
    if (s == "width-sweep") return ExperimentKind::width_sweep;
    if (s == "depth-sweep") return ExperimentKind::depth_sweep;
    if (s == "cosine") return ExperimentKind::cosine_contrast;
    if (s == "conjecture") return ExperimentKind::conjecture_sweep;
    if (s == "theory-check") return ExperimentKind::theory_battery;
    if (s == "init-demo") return ExperimentKind::init_demo;
    return parse_experiment_kind(s);
}

/// Splits "a,b,c" and trims blanks.
inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : s) {
        if (c == ',') flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

inline std::vector<Activation> parse_activation_list(std::string_view s) {
    std::vector<Activation> out;
    for (const auto& a : split_list(s)) out.push_back(parse_activation(a));
    return out;
}

inline std::vector<InitKind> parse_init_list(std::string_view s) {
    std::vector<InitKind> out;
    for (const auto& a : split_list(s)) out.push_back(parse_init_kind(a));
    return out;
}

namespace detail {

template <class T, class Parse>
std::vector<T> string_or_list(const nlohmann::json& j, Parse parse) {
    std::vector<T> out;
    if (j.is_string()) {
        for (const auto& s : split_list(j.get<std::string>())) out.push_back(parse(s));
    } else if (j.is_array()) {
        for (const auto& e : j) out.push_back(parse(e.get<std::string>()));
    } else {
        throw DomainError("expected a string or a list of strings");
    }
    return out;
}

}  // namespace detail

/// Reads a JSON object into a spec. Unknown keys are rejected.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DomainError("config must be a JSON object");
    ExperimentSpec s;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "kind") s.kind = parse_kind_name(v.get<std::string>());
            else if (key == "n") s.n = v.get<std::size_t>();
            else if (key == "d") s.widths = {v.get<std::size_t>()};
            else if (key == "d_list") s.widths = v.get<std::vector<std::size_t>>();
            else if (key == "depth") s.depth = v.get<std::size_t>();
            else if (key == "activation")
                s.activations = detail::string_or_list<Activation>(v, [](const std::string& x) { return parse_activation(x); });
            else if (key == "chain_kind") s.chain_kind = parse_chain_kind(v.get<std::string>());
            else if (key == "seeds") s.seeds = v.get<std::vector<std::uint64_t>>();
            else if (key == "n_seeds") s.n_seeds = v.get<std::size_t>();
            else if (key == "master_seed") s.master_seed = v.get<std::uint64_t>();
            else if (key == "burn_in") s.burn_in = v.get<std::size_t>();
            else if (key == "out") s.out = v.get<std::string>();
            else if (key == "input") s.input = parse_input_kind(v.get<std::string>());
            else if (key == "init")
                s.inits = detail::string_or_list<InitKind>(v, [](const std::string& x) { return parse_init_kind(x); });
            else if (key == "threads") s.threads = v.get<std::size_t>();
            else throw DomainError("unknown key");
        } catch (const nlohmann::json::exception& e) {
            throw DomainError("config key '" + key + "': " + e.what());
        } catch (const DomainError& e) {
            throw DomainError("config key '" + key + "': " + e.what());
        }
    }
    return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError("config file '" + path + "': " + e.what());
    }
    return spec_from_json(j);
}

/// Command-line values; every set field replaces the config-file value.
struct SpecOverrides {
    std::optional<std::size_t> n, d, depth, seeds, burn_in, threads;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::string> d_list, activation, chain, init, input, out;
    bool corrupt_scaling = false;
};

/// Applies `o` on top of `s`, sets the kind and fills defaults.
inline ExperimentSpec merge_overrides(ExperimentSpec s, ExperimentKind kind, const SpecOverrides& o) {
    s.kind = kind;
    if (o.n) s.n = *o.n;
    if (o.d && o.d_list) throw DomainError("--d and --d-list are mutually exclusive");
    if (o.d) s.widths = {*o.d};
    if (o.d_list) {
        s.widths.clear();
        for (const auto& w : split_list(*o.d_list)) {
            std::size_t pos = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(w, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos == 0 || pos != w.size()) throw DomainError("bad width '" + w + "'");
            s.widths.push_back(static_cast<std::size_t>(v));
        }
    }
    if (o.depth) s.depth = *o.depth;
    if (o.seeds) {
        if (*o.seeds == 0) throw DomainError("--seeds must be at least 1");
        s.seeds.clear();
        s.n_seeds = *o.seeds;
    }
    if (o.master_seed) s.master_seed = *o.master_seed;
    if (o.activation) s.activations = parse_activation_list(*o.activation);
    if (o.chain) s.chain_kind = parse_chain_kind(*o.chain);
    if (o.init) s.inits = parse_init_list(*o.init);
    if (o.input) s.input = parse_input_kind(*o.input);
    if (o.burn_in) s.burn_in = *o.burn_in;
    if (o.out) s.out = *o.out;
    if (o.threads) s.threads = *o.threads;
    s.corrupt_scaling = s.corrupt_scaling || o.corrupt_scaling;
    return with_defaults(s);
}

/// Effective parameters of a completed spec, one `key=value` per line.
inline std::string echo_spec(const ExperimentSpec& s) {
    auto join = [](const auto& xs, auto name) {
        std::string r;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) r += ',';
            r += name(xs[i]);
        }
        return r;
    };
    auto num = [](auto x) { return std::to_string(x); };
    auto str = [](auto x) { return std::string(to_string(x)); };
    std::ostringstream os;
    os << "kind=" << to_string(s.kind) << '\n';
    os << "n=" << (s.n ? std::to_string(*s.n) : "auto") << '\n';
    os << "d_list=" << join(s.widths, num) << '\n';
    os << "depth=" << (s.depth ? std::to_string(*s.depth) : "auto") << '\n';
    os << "activation=" << join(s.activations, str) << '\n';
    os << "chain_kind=" << to_string(s.chain_kind) << '\n';
    os << "input=" << (s.input ? std::string(to_string(*s.input)) : "auto") << '\n';
    os << "init=" << join(s.inits, str) << '\n';
    os << "seeds=" << join(s.seeds, num) << '\n';
    os << "master_seed=" << s.master_seed << '\n';
    os << "burn_in=" << (s.burn_in ? std::to_string(*s.burn_in) : "auto") << '\n';
    os << "out=" << (s.out.empty() ? "-" : s.out) << '\n';
    os << "threads=" << resolve_threads(s.threads) << '\n';
    return os.str();
}

}  // namespace orthochain
