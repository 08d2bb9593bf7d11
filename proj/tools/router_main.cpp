#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "semroute/bench/runner.hpp"
#include "semroute/config.hpp"
#include "semroute/extproc/server.hpp"
#include "semroute/sim/server.hpp"

namespace {

std::atomic<bool> g_stop{false};
std::atomic<bool> g_reload{false};

void on_signal(int sig) {
  if (sig == SIGHUP) {
    g_reload.store(true);
  } else {
    g_stop.store(true);
  }
}

// "host:port" with an optional host part.
bool split_listen(const std::string& addr, std::string* host, int* port) {
  const std::size_t colon = addr.rfind(':');
  if (colon == std::string::npos) return false;
  const std::string host_part = addr.substr(0, colon);
  *host = host_part.empty() ? "127.0.0.1" : host_part;
  try {
    *port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    return false;
  }
  return *port >= 0 && *port <= 65535;
}

std::filesystem::path resolve_config_path(const std::string& flag_value) {
  if (const char* env = std::getenv("ROUTER_CONFIG");
      env != nullptr && *env != '\0') {
    return env;
  }
  return flag_value;
}

int cmd_validate(const std::string& config_flag) {
  try {
    const auto path = resolve_config_path(config_flag);
    semroute::load_config(path);
    std::cout << "ok: " << path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_serve(const std::string& config_flag, const std::string& listen,
              const std::string& decision_log_path) {
  std::string host;
  int port = 0;
  if (!split_listen(listen, &host, &port)) {
    std::cerr << "invalid --listen address '" << listen << "'\n";
    return 1;
  }

  const auto config_path = resolve_config_path(config_flag);
  semroute::SnapshotHolder holder;
  try {
    holder.store(semroute::Snapshot::build(semroute::load_config(config_path)));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  std::ofstream log_file;
  std::ostream* log_stream = &std::cout;
  if (!decision_log_path.empty()) {
    log_file.open(decision_log_path, std::ios::app);
    if (!log_file) {
      std::cerr << "cannot open decision log " << decision_log_path << "\n";
      return 1;
    }
    log_stream = &log_file;
  }
  semroute::extproc::DecisionLog log(log_stream);
  semroute::extproc::MetricsSink metrics;

  semroute::extproc::ExtProcServer server(&holder, &metrics, &log,
                                          {host, port});
  if (!server.start()) {
    std::cerr << "failed to bind " << host << ":" << port << "\n";
    return 1;
  }
  std::cerr << "ext_proc gateway listening on " << host << ":"
            << server.port() << " (config " << config_path.string()
            << ", SIGHUP reloads)\n";

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGHUP, on_signal);
  while (!g_stop.load()) {
    if (g_reload.exchange(false)) {
      std::string error;
      if (holder.reload_from_file(config_path, &error)) {
        std::cerr << "config reloaded\n";
      } else {
        std::cerr << "reload rejected, keeping previous config: " << error
                  << "\n";
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  server.stop();
  return 0;
}

int cmd_sim_serve(const std::string& cost_model_path,
                  const std::string& listen, double time_scale) {
  std::string host;
  int port = 0;
  if (!split_listen(listen, &host, &port)) {
    std::cerr << "invalid --listen address '" << listen << "'\n";
    return 1;
  }
  semroute::sim::CostModel model;
  try {
    model = semroute::sim::CostModel::load(cost_model_path);
  } catch (const std::exception& e) {
    std::cerr << "cost model error: " << e.what() << "\n";
    return 1;
  }
  semroute::sim::SimServer server(std::move(model),
                                  {host, port, time_scale});
  if (!server.start()) {
    std::cerr << "failed to bind " << host << ":" << port << "\n";
    return 1;
  }
  std::cerr << "simulated backend listening on " << host << ":"
            << server.port() << "\n";
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  server.stop();
  return 0;
}

std::string format_for(const std::filesystem::path& out) {
  const std::string ext = out.extension().string();
  if (ext == ".md" || ext == ".markdown") return "markdown";
  if (ext == ".csv") return "csv";
  if (ext == ".json") return "json";
  return "";
}

int cmd_bench_run(const std::string& dataset_path, const std::string& config_flag,
                  const std::string& cost_model_path,
                  std::optional<std::uint64_t> seed, const std::string& out,
                  const std::string& baseline_mode,
                  const std::string& baseline_model) {
  try {
    const auto queries = semroute::bench::load_dataset(dataset_path);
    if (queries.empty()) {
      std::cerr << "warning: dataset " << dataset_path << " is empty\n";
    }
    const auto snapshot = semroute::Snapshot::build(
        semroute::load_config(resolve_config_path(config_flag)));
    const auto cost_model = semroute::sim::CostModel::load(cost_model_path);

    semroute::bench::BenchOptions options;
    options.seed = seed;
    semroute::bench::BaselineArm arm;
    arm.name = baseline_mode == "off" ? "always-off" : "always-on";
    arm.mode = baseline_mode == "off" ? semroute::ReasoningMode::Off
                                      : semroute::ReasoningMode::On;
    arm.model = baseline_model;
    options.baselines = {arm};

    const semroute::bench::MetricsReport report =
        semroute::bench::run_bench(queries, *snapshot, cost_model, options);

    if (!out.empty()) {
      const std::string format = format_for(out);
      if (format.empty()) {
        std::cerr << "cannot infer report format from '" << out
                  << "' (use .md, .csv, or .json)\n";
        return 1;
      }
      std::ofstream file(out);
      if (!file) {
        std::cerr << "cannot open output file " << out << "\n";
        return 1;
      }
      file << semroute::bench::emit_report(report, format);
      std::cerr << "wrote " << out << "\n";
    }
    std::cout << semroute::bench::emit_markdown(report);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bench error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_convert(const std::string& in, const std::string& out) {
  try {
    const std::size_t n = semroute::bench::convert_mmlupro(in, out);
    std::cout << "converted " << n << " queries to " << out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "convert error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic router: intent classification, guards, and "
               "selective reasoning for chat-completion traffic"};
  app.require_subcommand(1);

  // validate
  std::string validate_config;
  CLI::App* validate = app.add_subcommand(
      "validate", "Validate a router config file and exit");
  validate->add_option("--config", validate_config, "Router config path")
      ->required();

  // serve
  std::string serve_config;
  std::string serve_listen = "127.0.0.1:9001";
  std::string serve_log;
  CLI::App* serve = app.add_subcommand(
      "serve", "Run the Envoy external-processing gateway");
  serve->add_option("--config", serve_config,
                    "Router config path (ROUTER_CONFIG overrides)");
  serve->add_option("--listen", serve_listen, "host:port to listen on");
  serve->add_option("--decision-log", serve_log,
                    "Append decision JSON lines to this file (default stdout)");

  // sim serve
  CLI::App* sim = app.add_subcommand("sim", "Simulated backend");
  std::string sim_cost_model;
  std::string sim_listen = "127.0.0.1:8000";
  double sim_time_scale = 1.0;
  CLI::App* sim_serve =
      sim->add_subcommand("serve", "Run the simulated chat-completion backend");
  sim_serve->add_option("--cost-model", sim_cost_model, "Cost model path")
      ->required();
  sim_serve->add_option("--listen", sim_listen, "host:port to listen on");
  sim_serve->add_option("--time-scale", sim_time_scale,
                        "Multiplier on simulated delays (0 disables sleeping)");

  // bench
  CLI::App* bench = app.add_subcommand("bench", "Benchmark harness");
  std::string bench_dataset;
  std::string bench_config;
  std::string bench_cost_model;
  std::string bench_out;
  std::string bench_baseline_mode = "on";
  std::string bench_baseline_model;
  std::uint64_t bench_seed = 0;
  bool bench_seed_set = false;
  CLI::App* bench_run = bench->add_subcommand(
      "run", "Run the router and baseline arms over a dataset");
  bench_run->add_option("--dataset", bench_dataset, "JSONL dataset path")
      ->required();
  bench_run->add_option("--config", bench_config, "Router config path")
      ->required();
  bench_run->add_option("--cost-model", bench_cost_model, "Cost model path")
      ->required();
  bench_run
      ->add_option_function<std::uint64_t>(
          "--seed",
          [&](std::uint64_t v) {
            bench_seed = v;
            bench_seed_set = true;
          },
          "Override the cost model seed")
      ->expected(1);
  bench_run->add_option("--out", bench_out,
                        "Write the report here (.md, .csv, or .json)");
  bench_run
      ->add_option("--baseline", bench_baseline_mode,
                   "Fixed reasoning mode for the baseline arm (on|off)")
      ->check(CLI::IsMember({"on", "off"}));
  bench_run->add_option("--baseline-model", bench_baseline_model,
                        "Force this model on the baseline arm");

  std::string convert_in;
  std::string convert_out;
  CLI::App* convert = bench->add_subcommand(
      "convert-mmlupro", "Convert an MMLU-Pro JSONL export to dataset format");
  convert->add_option("--in", convert_in, "Raw MMLU-Pro JSONL")->required();
  convert->add_option("--out", convert_out, "Output dataset path")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(validate_config);
  if (serve->parsed()) return cmd_serve(serve_config, serve_listen, serve_log);
  if (sim->parsed() && sim_serve->parsed()) {
    return cmd_sim_serve(sim_cost_model, sim_listen, sim_time_scale);
  }
  if (bench->parsed() && bench_run->parsed()) {
    return cmd_bench_run(bench_dataset, bench_config, bench_cost_model,
                         bench_seed_set
                             ? std::optional<std::uint64_t>(bench_seed)
                             : std::nullopt,
                         bench_out, bench_baseline_mode, bench_baseline_model);
  }
  if (bench->parsed() && convert->parsed()) {
    return cmd_convert(convert_in, convert_out);
  }
  std::cerr << app.help();
  return 1;
}
