#include "fosyn/cli.hpp"

#include "fosyn/errors.hpp"
#include "json_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace fosyn::cli {

namespace {

double parse_bound(const std::string& raw) {
  std::string low = raw;
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (low == "inf" || low == "+inf" || low == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw InvalidInputError("bound \"" + raw + "\" is neither a number nor \"inf\"");
  }
  if (used != raw.size()) {
    throw InvalidInputError("bound \"" + raw + "\" is neither a number nor \"inf\"");
  }
  return value;
}

std::string phase_text(const PhaseOutcome& p) {
  if (!p.attempted) return "skipped";
  return p.succeeded ? "succeeded" : "failed";
}

std::string value_text(double v) {
  return std::isfinite(v) ? detail::format_double(v) : "\"inf\"";
}

std::string report_text(const SynthesisReport& rep, const PlantSet& ps,
                        const ObjectiveSpec& spec) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"feasible\": " << (rep.feasible ? "true" : "false") << ",\n";
  out << "  \"stabilized\": " << (rep.stabilized ? "true" : "false") << ",\n";
  out << "  \"message\": " << nlohmann::json(rep.message).dump() << ",\n";
  out << "  \"seed\": " << rep.seed << ",\n";
  out << "  \"best_start\": " << rep.best_start << ",\n";
  out << "  \"order\": " << spec.order << ",\n";
  out << "  \"plants\": [";
  for (std::size_t i = 0; i < ps.plants.size(); ++i) {
    out << (i ? ", " : "") << nlohmann::json(ps.plants[i].name).dump();
  }
  out << "],\n  \"spec\": \"";
  for (const auto& e : spec.entries) {
    out << to_char(e.kind);
  }
  out << "\",\n  \"bounds\": [";
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    out << (i ? ", " : "") << value_text(spec.entries[i].bound);
  }
  out << "],\n  \"achieved\": [";
  for (std::size_t i = 0; i < rep.achieved.size(); ++i) {
    out << (i ? ", " : "") << value_text(rep.achieved[i]);
  }
  out << "],\n";
  out << "  \"phases\": {\"stabilization\": \"" << phase_text(rep.stabilization)
      << "\", \"feasibility\": \"" << phase_text(rep.feasibility)
      << "\", \"optimization\": \"" << phase_text(rep.optimization) << "\"},\n";
  out << "  \"starts\": [";
  for (std::size_t s = 0; s < rep.start_summaries.size(); ++s) {
    const StartSummary& sum = rep.start_summaries[s];
    out << (s ? ",\n             " : "");
    out << "{\"stabilized\": " << (sum.stabilized ? "true" : "false")
        << ", \"feasible\": " << (sum.feasible ? "true" : "false")
        << ", \"objective\": " << value_text(sum.objective)
        << ", \"violation\": " << value_text(sum.violation) << ", \"termination\": \""
        << to_string(sum.termination) << "\"}";
  }
  out << "],\n";
  out << "  \"controller\": {\n";
  const std::pair<const char*, const Matrix*> blocks[] = {{"AK", &rep.controller.AK},
                                                          {"BK", &rep.controller.BK},
                                                          {"CK", &rep.controller.CK},
                                                          {"DK", &rep.controller.DK}};
  for (std::size_t i = 0; i < std::size(blocks); ++i) {
    out << "    \"" << blocks[i].first << "\": " << detail::matrix_text(*blocks[i].second)
        << (i + 1 < std::size(blocks) ? ",\n" : "\n");
  }
  out << "  }\n}\n";
  return out.str();
}

void write_text_file(const std::string& text, const std::string& path, const char* who) {
  std::ofstream out(path);
  if (!out) {
    throw Error(std::string(who) + ": cannot open " + path);
  }
  out << text;
}

}  // namespace

void write_history(const std::vector<std::vector<double>>& histories, const std::string& path) {
  if (histories.empty()) {
    throw InvalidInputError("write_history: no traces");
  }
  std::ostringstream out;
  out << "start,iteration,value,best_so_far\n";
  for (std::size_t s = 0; s < histories.size(); ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < histories[s].size(); ++i) {
      best = std::min(best, histories[s][i]);
      out << s << ',' << i << ',' << detail::format_double(histories[s][i]) << ','
          << detail::format_double(best) << '\n';
    }
  }
  write_text_file(out.str(), path, "write_history");
}

int run(const CliConfig& cfg) {
  try {
    const std::size_t nplants = cfg.plant_paths.size();
    if (nplants == 0) {
      std::cerr << "error: at least one plant file is required\n";
      return 1;
    }
    if (cfg.spec_string.size() != nplants || cfg.bounds.size() != nplants) {
      std::cerr << "error: " << nplants << " plant(s), spec of length " << cfg.spec_string.size()
                << " and " << cfg.bounds.size()
                << " bound(s); one spec character and one bound per plant\n";
      return 1;
    }
    if (cfg.order < 0 || cfg.restarts < 1 || cfg.print_level < 0 || cfg.print_level > 2) {
      std::cerr << "error: order must be >= 0, restarts >= 1, print in {0,1,2}\n";
      return 1;
    }

    PlantSet ps;
    for (const std::string& path : cfg.plant_paths) {
      ps.plants.push_back(load_plant_file(path));
    }
    ObjectiveSpec spec;
    spec.order = cfg.order;
    for (std::size_t i = 0; i < nplants; ++i) {
      spec.entries.push_back({kind_from_char(cfg.spec_string[i]), parse_bound(cfg.bounds[i])});
    }

    SynthesisOptions opts;
    opts.starts = cfg.restarts;
    opts.seed = cfg.seed;
    opts.sampling = cfg.sampling;
    std::vector<double> stream_best(cfg.restarts, std::numeric_limits<double>::infinity());
    if (cfg.print_level >= 2) {
      opts.on_iteration = [&stream_best](int start, int iter, double value) {
        stream_best[start] = std::min(stream_best[start], value);
        std::cout << "start " << start << " iter " << iter << " value "
                  << detail::format_double(value) << " best "
                  << detail::format_double(stream_best[start]) << '\n';
      };
    }

    const SynthesisReport rep = synthesize(ps, spec, opts);

    save_controller_file(rep.controller, cfg.out_path);
    if (!cfg.report_path.empty()) {
      write_text_file(report_text(rep, ps, spec), cfg.report_path, "report");
    }
    if (!cfg.history_path.empty()) {
      write_history(rep.histories, cfg.history_path);
    }

    if (cfg.print_level >= 1) {
      for (std::size_t i = 0; i < nplants; ++i) {
        const char kind = cfg.spec_string[i];
        std::cout << "plant " << ps.plants[i].name << " [" << kind << "]: achieved "
                  << rep.achieved[i];
        if (std::isfinite(spec.entries[i].bound)) {
          std::cout << " (bound " << spec.entries[i].bound << ")";
        }
        std::cout << '\n';
      }
      std::cout << "feasible: " << (rep.feasible ? "yes" : "no") << '\n';
      if (!rep.message.empty()) {
        std::cout << rep.message << '\n';
      }
      std::cout << "controller written to " << cfg.out_path << '\n';
    }
    return (rep.feasible && rep.stabilized) ? 0 : 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NoFiniteH2Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!cfg.report_path.empty()) {
      write_text_file(std::string("{\n  \"feasible\": false,\n  \"message\": ") +
                          nlohmann::json(e.what()).dump() + "\n}\n",
                      cfg.report_path, "report");
    }
    return 2;
  } catch (const WellPosednessError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"fixed-order H2 / H-infinity output-feedback controller synthesis"};
  CliConfig cfg;
  app.add_option("-p,--plant", cfg.plant_paths, "problem file, repeat once per plant")
      ->required();
  app.add_option("-s,--spec", cfg.spec_string,
                 "objective string, one character per plant: s (spectral abscissa), t (H2), "
                 "h (H-infinity)")
      ->required();
  app.add_option("-b,--bound", cfg.bounds,
                 "per-plant bound, a positive number or \"inf\" to minimize; repeat once per "
                 "plant")
      ->required();
  app.add_option("-o,--order", cfg.order, "controller order (0 = static output feedback)");
  app.add_option("--restarts", cfg.restarts, "number of random starts (default 3)");
  app.add_option("--seed", cfg.seed, "random seed recorded in the report");
  app.add_flag("--sampling", cfg.sampling, "refine each run with gradient sampling");
  app.add_option("--print", cfg.print_level, "0 silent, 1 summary, 2 per-iteration values")
      ->check(CLI::Range(0, 2));
  app.add_option("--out", cfg.out_path, "controller output path (default controller.json)");
  app.add_option("--report", cfg.report_path, "synthesis report output path");
  app.add_option("--history", cfg.history_path, "per-iteration history CSV path");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return run(cfg);
}

}  // namespace fosyn::cli
