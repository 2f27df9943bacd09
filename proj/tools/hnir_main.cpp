#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hnir/engine.hpp"
#include "hnir/service.hpp"
#include "hnir/synthgen.hpp"

namespace {

using namespace hnir;

hnir::Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

struct EnrollArgs {
  std::string store, left, right, name, national_id, address;
  double ev = kDefaultEv;
};

struct IdentifyArgs {
  std::string store, probe, mode = "auto", channels = "r,g,b", fusion = "union", quadrant = "whole";
  std::size_t k = kDefaultCandidates;
  double ev = kDefaultEv;
  bool json = false;
};

struct BenchArgs {
  int n = 1000, probes = 100, runs = 5;
  std::size_t k = kDefaultCandidates;
  double noise = 8.0;
  std::uint64_t seed = 42;
  bool json = false;
};

struct GenArgs {
  int n = 200;
  std::string out;
  std::uint64_t seed = 42;
  double noise = 8.0;
};

struct ServeArgs {
  std::string store, listen = "127.0.0.1:8080";
};

int run_enroll(const EnrollArgs& a) {
  IndexStore store = IndexStore::open(a.store);
  Engine engine(store);
  EnrollRequest req;
  req.identity = {a.name, a.national_id, a.address};
  req.ev = a.ev;
  if (!a.left.empty()) req.left = EyeImage{load_image(a.left), a.left};
  if (!a.right.empty()) req.right = EyeImage{load_image(a.right), a.right};
  for (const auto& e : engine.enroll(req)) {
    std::printf("%s\t%s\t%s\n", e.id.to_string().c_str(), std::string(to_string(e.eye)).c_str(),
                e.code.to_hex().c_str());
  }
  return 0;
}

int run_identify(const IdentifyArgs& a) {
  IndexStore store = IndexStore::open(a.store, false);
  Engine engine(store);
  IdentifyParams p;
  p.mode = parse_mode(a.mode);
  p.channels = ChannelSet::parse(a.channels);
  p.fusion = parse_fusion(a.fusion);
  p.quadrant = parse_quadrant(a.quadrant);
  p.k = a.k;
  p.ev = a.ev;
  if (p.mode == MatchMode::Manual && p.channels.size() == 1) p.fusion = Fusion::Single;
  const IdentifyResult result = engine.identify(load_image(a.probe), p);
  if (a.json) {
    std::cout << to_json(result).dump(2) << '\n';
    return 0;
  }
  std::printf("probe %s\n", result.probe_code.to_hex().c_str());
  std::printf("%-4s %-22s %-5s %-8s %-8s %-8s %-8s %s\n", "rank", "record_id", "code", "hd_r", "hd_g",
              "hd_b", "hd_fused", "decision");
  const auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (v) std::snprintf(buf, sizeof buf, "%.4f", *v);
    else std::snprintf(buf, sizeof buf, "-");
    return std::string(buf);
  };
  for (const auto& r : result.results) {
    std::printf("%-4d %-22s %-5d %-8s %-8s %-8s %-8.4f %s\n", r.rank, r.id.to_string().c_str(),
                r.code_distance, cell(r.score.hd_r).c_str(), cell(r.score.hd_g).c_str(),
                cell(r.score.hd_b).c_str(), r.score.hd_fused, r.score.accept ? "ACCEPT" : "REJECT");
  }
  return 0;
}

int run_bench(const BenchArgs& a) {
  BenchOptions o;
  o.gallery_size = a.n;
  o.probes = a.probes;
  o.k = a.k;
  o.noise_sigma = a.noise;
  o.seed = a.seed;
  o.runs = a.runs;
  const BenchReport r = bench(o);
  const nlohmann::json j = {{"gallery_size", r.gallery_size},
                            {"probes", r.probes},
                            {"k", r.k},
                            {"runs", r.runs},
                            {"exhaustive_comparisons", r.exhaustive_comparisons},
                            {"indexed_comparisons", r.indexed_comparisons},
                            {"exhaustive_wall_time", r.exhaustive_wall_time},
                            {"indexed_wall_time", r.indexed_wall_time},
                            {"comparison_reduction_fraction", r.comparison_reduction_fraction},
                            {"time_ratio", r.time_ratio},
                            {"recall_at_k", r.recall_at_k},
                            {"exhaustive_rank1", r.exhaustive_rank1},
                            {"indexed_rank1", r.indexed_rank1}};
  if (a.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& [key, value] : j.items()) std::cout << key << ": " << value.dump() << '\n';
  }
  return 0;
}

int run_gen(const GenArgs& a) {
  const auto gallery = synth::generate_gallery(a.n, a.seed, a.noise);
  synth::write_gallery(a.out, gallery);
  std::printf("wrote %d identities to %s\n", a.n, a.out.c_str());
  return 0;
}

int run_serve(const ServeArgs& a) {
  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "--listen expects HOST:PORT");
  const std::string host = a.listen.substr(0, colon);
  const int port = std::stoi(a.listen.substr(colon + 1));
  IndexStore store = IndexStore::open(a.store);
  Engine engine(store);
  Service service(engine, std::filesystem::path(a.store) / "images");
  const int bound = service.bind(host, port);
  if (bound < 0) throw Error(Errc::IoFailure, "cannot listen on " + a.listen);
  g_service = &service;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::fprintf(stderr, "serving %s on %s:%d (%zu records)\n", a.store.c_str(), host.c_str(), bound,
               store.size());
  service.listen_after_bind();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Colour iris enrollment and identification"};
  app.require_subcommand(1);

  EnrollArgs enroll;
  auto* e = app.add_subcommand("enroll", "Enroll one or both eyes of an identity");
  e->add_option("--store", enroll.store, "Store directory")->required();
  e->add_option("--left", enroll.left, "Left eye image");
  e->add_option("--right", enroll.right, "Right eye image");
  e->add_option("--name", enroll.name)->required();
  e->add_option("--national-id", enroll.national_id)->required();
  e->add_option("--address", enroll.address)->required();
  e->add_option("--ev", enroll.ev, "Binarization factor")->capture_default_str();

  IdentifyArgs identify;
  auto* i = app.add_subcommand("identify", "Rank enrolled records against a probe image");
  i->add_option("--store", identify.store)->required();
  i->add_option("--probe", identify.probe)->required();
  i->add_option("--mode", identify.mode)->check(CLI::IsMember({"auto", "manual"}, CLI::ignore_case));
  i->add_option("--channels", identify.channels, "Comma separated subset of r,g,b");
  i->add_option("--fusion", identify.fusion)
      ->check(CLI::IsMember({"union", "intersection", "single"}, CLI::ignore_case));
  i->add_option("--quadrant", identify.quadrant, "1..4 or whole");
  i->add_option("--k", identify.k)->capture_default_str();
  i->add_option("--ev", identify.ev)->capture_default_str();
  i->add_flag("--json", identify.json);

  BenchArgs bench_args;
  auto* b = app.add_subcommand("bench", "Exhaustive versus indexed search on a generated gallery");
  b->add_option("--n", bench_args.n)->capture_default_str();
  b->add_option("--probes", bench_args.probes)->capture_default_str();
  b->add_option("--k", bench_args.k)->capture_default_str();
  b->add_option("--noise", bench_args.noise)->capture_default_str();
  b->add_option("--seed", bench_args.seed)->capture_default_str();
  b->add_option("--runs", bench_args.runs)->capture_default_str();
  b->add_flag("--json", bench_args.json);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a synthetic gallery and manifest");
  g->add_option("--n", gen.n)->capture_default_str();
  g->add_option("--out", gen.out)->required();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--noise", gen.noise)->capture_default_str();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the HTTP API");
  s->add_option("--store", serve.store)->required();
  s->add_option("--listen", serve.listen, "HOST:PORT")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*e) {
      if (enroll.left.empty() && enroll.right.empty()) {
        throw Error(Errc::InvalidArgument, "enroll needs --left and/or --right");
      }
      return run_enroll(enroll);
    }
    if (*i) return run_identify(identify);
    if (*b) return run_bench(bench_args);
    if (*g) return run_gen(gen);
    if (*s) return run_serve(serve);
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(err.code())).c_str(), err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
