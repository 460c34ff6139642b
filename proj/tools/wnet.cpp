// wnet: verification, accounting, matrix inspection and toy training for the
// WaveletNet building blocks.
//
// Exit codes: 0 success, 1 check failure, 2 usage or environment error.
// Machine-readable JSON goes to stdout, human-readable summaries to stderr.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wnet/data.hpp"
#include "wnet/models.hpp"
#include "wnet/profiles.hpp"
#include "wnet/train.hpp"
#include "wnet/verify.hpp"

using nlohmann::json;

namespace {

void emit(const json& payload, bool pretty) {
    if (pretty)
        std::cout << payload.dump(2) << "\n";
    else
        std::cout << payload.dump() << "\n";
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string model = "imagenet";
    double width = 1.0;
    int kappa = 3;
    int t = 6;
    int m = 24;
    std::string head = "dense";
    std::string config_path;
    bool pretty = false;
};

int cmd_report(const ReportArgs& args) {
    wnet::ModelConfig config;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) {
            std::cerr << "report: cannot open config " << args.config_path << "\n";
            return 2;
        }
        config = json::parse(in).get<wnet::ModelConfig>();
    } else if (args.model == "imagenet") {
        config = wnet::imagenet_config(args.width, args.kappa, args.t);
        config.head = args.head;
    } else if (args.model == "cifar") {
        config = wnet::cifar_config(args.m, args.width);
    } else {
        std::cerr << "report: unknown model '" << args.model << "'\n";
        return 2;
    }

    wnet::ComplexityReport report = wnet::report_for(config);
    json payload = wnet::to_json(report);

    // the two readings of the ambiguous table head row, requested one first
    if (config.head != "none") {
        json readings = json::array();
        for (const std::string& head : {config.head, config.head == "dense" ? std::string("wconv")
                                                                            : std::string("dense")}) {
            wnet::ModelConfig alt = config;
            alt.head = head;
            wnet::ComplexityReport r = wnet::report_for(alt);
            readings.push_back(
                {{"head", head}, {"total_params", r.total_params}, {"total_macs", r.total_macs}});
        }
        payload["head_readings"] = readings;
    }
    emit(payload, args.pretty);
    std::cerr << config.name << " w=" << config.width_mult << ": " << report.total_params << " params, "
              << report.total_macs << " MACs, " << report.conv_layer_count << " conv layers, "
              << report.discrepancies.size() << " closed-form discrepancies\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite, std::uint64_t seed, bool pretty) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<wnet::CheckResult> results = wnet::verify_suite(suite, seed);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool all_ok = true;
    json checks = json::array();
    for (const auto& r : results) {
        all_ok = all_ok && r.passed;
        std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
        if (!r.detail.empty()) std::cerr << " (" << r.detail << ")";
        std::cerr << "\n";
        checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    }
    std::cerr << (all_ok ? "all checks passed" : "CHECKS FAILED") << " in " << elapsed << "s\n";
    emit(json{{"schema", "wnet.verify/1"},
              {"suite", suite},
              {"passed", all_ok},
              {"elapsed_seconds", elapsed},
              {"checks", checks}},
         pretty);
    return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

int cmd_haar(int d, int kappa, const std::string& sign_name, const std::string& format, bool pretty) {
    wnet::HaarMatrix h = wnet::haar_matrix(d, kappa, wnet::haar_sign_from_string(sign_name));
    if (format == "ascii") {
        std::cout << h.to_ascii();
    } else {
        json rows = json::array();
        for (int i = 0; i < d; ++i) {
            json row = json::array();
            for (int j = 0; j < d; ++j) row.push_back(h.get(i, j));
            rows.push_back(row);
        }
        emit(json{{"schema", "wnet.haar/1"}, {"d", d}, {"kappa", kappa}, {"sign", sign_name}, {"rows", rows}},
             pretty);
    }
    std::cerr << "H_" << d << " at depth " << kappa << " (" << sign_name << " sign), blocks";
    for (int b : h.block_sizes()) std::cerr << " " << b;
    std::cerr << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string profile = "toy-synth";
    bool ablate = false;
    bool pair = false;
    std::uint64_t seed = 0;
    std::string out = "train_log.jsonl";
    int steps = 500;
    std::string data_root;
    bool pretty = false;
};

wnet::ToyProfile make_profile(const TrainArgs& args) {
    if (args.profile == "toy-synth") return wnet::toy_synth_profile(args.seed, args.steps);
    if (args.profile == "toy-cifar") {
        std::string root = args.data_root;
        if (root.empty()) {
            const char* env = std::getenv("WNET_DATA_ROOT");
            if (env) root = env;
        }
        if (root.empty()) throw std::invalid_argument("toy-cifar: pass --data or set WNET_DATA_ROOT");
        return wnet::toy_cifar_profile(root, args.seed, args.steps);
    }
    throw std::invalid_argument("unknown profile '" + args.profile + "' (toy-synth|toy-cifar)");
}

void write_jsonl(const std::string& path, const wnet::TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& e : log.epochs) out << wnet::to_json(e).dump() << "\n";
}

json run_summary(const wnet::TrainLog& log, double test_err) {
    return json{{"steps", log.steps},
                {"initial_loss", log.initial_loss()},
                {"final_loss", log.final_loss()},
                {"halved", log.final_loss() <= 0.5 * log.initial_loss()},
                {"loss_monotone", log.loss_monotone()},
                {"flagged", !log.loss_monotone()},
                {"test_err", test_err}};
}

int cmd_train(const TrainArgs& args) {
    wnet::ToyProfile profile;
    try {
        profile = make_profile(args);
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 2;
    }

    json payload{{"schema", "wnet.train/1"}, {"profile", args.profile}, {"seed", args.seed}};

    if (args.pair) {
        std::cerr << "training pair (shared init, shared data order)\n";
        wnet::AblationPairResult pair = wnet::run_ablation_pair(profile, args.seed);
        write_jsonl(args.out + ".with.jsonl", pair.with_log);
        write_jsonl(args.out + ".without.jsonl", pair.without_log);
        payload["with_dfwt"] = run_summary(pair.with_log, pair.with_err);
        payload["without_dfwt"] = run_summary(pair.without_log, pair.without_err);
        payload["with_dfwt_err"] = pair.with_err;
        payload["without_dfwt_err"] = pair.without_err;
        payload["gap"] = pair.gap;
        emit(payload, args.pretty);
        std::cerr << "with_dfwt_err=" << pair.with_err << " without_dfwt_err=" << pair.without_err << " gap="
                  << pair.gap << "\n";
        return 0;
    }

    wnet::ModelConfig config = args.ablate ? wnet::ablation_of(profile.model) : profile.model;
    wnet::Model<float> model(wnet::plan_model(config), args.seed);
    std::cerr << "training " << config.name << " (" << model.param_count() << " params, seed " << args.seed
              << ")\n";
    wnet::TrainLog log = wnet::train(model, profile.train, profile.optimizer, &profile.test);
    const double test_err = wnet::evaluate(model, profile.test);
    write_jsonl(args.out, log);
    payload["run"] = run_summary(log, test_err);
    payload["log_path"] = args.out;
    emit(payload, args.pretty);
    std::cerr << "final loss " << log.final_loss() << " (initial " << log.initial_loss() << "), test err "
              << test_err << "%\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"WaveletNet building blocks: accounting, verification and toy training"};
    app.require_subcommand(1);

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "parameter and MAC accounting with closed-form cross-checks");
    report->add_option("--model", report_args.model, "imagenet|cifar")->check(CLI::IsMember({"imagenet", "cifar"}));
    report->add_option("--width", report_args.width, "width multiplier");
    report->add_option("--kappa", report_args.kappa, "logarithmic depth for kappa2 = kappa3");
    report->add_option("--t", report_args.t, "expansion ratio");
    report->add_option("--M", report_args.m, "blocks per stage (cifar)");
    report->add_option("--head", report_args.head, "dense|wconv head reading")
        ->check(CLI::IsMember({"dense", "wconv"}));
    report->add_option("--config", report_args.config_path, "model config JSON file (overrides --model)");
    report->add_flag("--json", report_args.pretty, "pretty-print the JSON payload");

    std::string suite = "all";
    std::uint64_t verify_seed = 0;
    bool verify_pretty = false;
    auto* verify = app.add_subcommand("verify", "run the property suites");
    verify->add_option("--suite", suite, "connectivity|oracle|gradients|all")
        ->check(CLI::IsMember({"connectivity", "oracle", "gradients", "all"}));
    verify->add_option("--seed", verify_seed, "seed for randomized checks");
    verify->add_flag("--json", verify_pretty, "pretty-print the JSON payload");

    int haar_d = 8, haar_kappa = 3;
    std::string haar_sign = "algorithm2", haar_format = "ascii";
    bool haar_pretty = false;
    auto* haar = app.add_subcommand("haar", "print the modified Haar matrix");
    haar->add_option("--d", haar_d, "matrix size (power of two)")->required();
    haar->add_option("--kappa", haar_kappa, "depth");
    haar->add_option("--sign", haar_sign, "algorithm2|matrix")->check(CLI::IsMember({"algorithm2", "matrix"}));
    haar->add_option("--format", haar_format, "ascii|json")->check(CLI::IsMember({"ascii", "json"}));
    haar->add_flag("--json", haar_pretty, "pretty-print (json format)");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "desk-scale training profiles");
    train->add_option("--profile", train_args.profile, "toy-synth|toy-cifar")
        ->check(CLI::IsMember({"toy-synth", "toy-cifar"}));
    train->add_flag("--ablate-dfwt", train_args.ablate, "train the DFWT-less twin");
    train->add_flag("--pair", train_args.pair, "train both twins with shared init and data order");
    train->add_option("--seed", train_args.seed, "seed");
    train->add_option("--out", train_args.out, "JSONL log path");
    train->add_option("--steps", train_args.steps, "step budget");
    train->add_option("--data", train_args.data_root, "dataset root (or WNET_DATA_ROOT)");
    train->add_flag("--json", train_args.pretty, "pretty-print the JSON payload");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) return cmd_report(report_args);
        if (verify->parsed()) return cmd_verify(suite, verify_seed, verify_pretty);
        if (haar->parsed()) return cmd_haar(haar_d, haar_kappa, haar_sign, haar_format, haar_pretty);
        if (train->parsed()) return cmd_train(train_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
