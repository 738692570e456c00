// Command-line front end for the experiment runners.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "orthochain/orthochain.hpp"

namespace {

void add_flags(CLI::App* sub, orthochain::SpecOverrides& f, std::optional<std::string>& config) {
    sub->add_option("--n", f.n, "batch size");
    sub->add_option("--d", f.d, "width");
    sub->add_option("--d-list", f.d_list, "comma-separated widths");
    sub->add_option("--depth", f.depth, "number of layers");
    sub->add_option("--seeds", f.seeds, "number of seeds");
    sub->add_option("--master-seed", f.master_seed, "master seed");
    sub->add_option("--activation", f.activation, "linear|relu|tanh|sin|sigmoid, comma-separated for sweeps");
    sub->add_option("--chain", f.chain, "bn|vanilla");
    sub->add_option("--init", f.init, "gaussian|xavier|iterative, comma-separated");
    sub->add_option("--input", f.input, "gaussian|correlated|orthogonal");
    sub->add_option("--burn-in", f.burn_in, "layers discarded before averaging");
    sub->add_option("--config", config, "JSON config; flags override its values");
    sub->add_option("--out", f.out, "CSV path (default: standard output)");
    sub->add_option("--threads", f.threads, "worker cap (default: ORTHOCHAIN_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonality of random batch-normalized chains"};
    app.require_subcommand(1);
    orthochain::SpecOverrides flags;
    std::optional<std::string> config;
    const std::pair<const char*, const char*> subcommands[] = {
        {"chain", "simulate one chain configuration"},
        {"width-sweep", "mean orthogonality gap against width, with log-log slope"},
        {"depth-sweep", "orthogonality gap against depth, decay rate and plateau"},
        {"cosine", "BN against vanilla cosine similarity of two samples"},
        {"conjecture", "stationarity gap of nonlinear chains against width"},
        {"theory-check", "run every bound verifier; nonzero exit on any failure"},
        {"init-demo", "orthogonality gap of vanilla networks under each initializer"},
    };
    for (auto [name, about] : subcommands) {
        CLI::App* sub = app.add_subcommand(name, about);
        add_flags(sub, flags, config);
        if (std::string(name) == "theory-check")
            sub->add_flag("--corrupt-scaling", flags.corrupt_scaling, "drop the width factor (negative control)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    CLI::App* sub = app.get_subcommands().front();

    orthochain::ExperimentSpec spec;
    try {
        const auto base = config ? orthochain::load_spec(*config) : orthochain::ExperimentSpec{};
        spec = orthochain::merge_overrides(base, orthochain::parse_kind_name(sub->get_name()), flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    }
    std::cerr << orthochain::echo_spec(spec);

    try {
        const auto outcome = orthochain::run_experiment(spec);
        if (spec.out.empty()) {
            orthochain::write_csv(std::cout, outcome.records);
            std::cout.flush();
        } else {
            std::ofstream out(spec.out, std::ios::binary);
            if (!out) throw orthochain::Error("cannot open '" + spec.out + "' for writing");
            orthochain::write_csv(out, outcome.records);
            if (!out) throw orthochain::Error("write to '" + spec.out + "' failed");
        }
        std::cerr << outcome.summary << '\n';
        return outcome.ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 1;
    }
}
