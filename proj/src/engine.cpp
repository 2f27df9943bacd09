#include "hnir/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "hnir/error.hpp"
#include "hnir/synthgen.hpp"

namespace hnir {

ProcessedImage process_image(const RasterImage& img, const EngineConfig& config) {
  const Channels ch = split_channels(img);
  const Plane gray = luminance(ch.r, ch.g, ch.b);
  const PupilLocation pupil = locate_pupil(gray, config.locate);
  ProcessedImage out;
  out.geometry = locate_iris(gray, pupil, config.locate);
  out.normalized = normalize_crop(img, out.geometry, config.locate.pad_out_of_frame);

  CodeOptions code_opts;
  code_opts.ev = config.ev;
  code_opts.ratio_threshold = config.ratio_threshold;
  code_opts.nir_proxy = config.nir_proxy;
  out.code = generate_code(out.normalized, std::nullopt, code_opts);

  if (config.enhance) {
    std::vector<Plane> planes;
    for (std::size_t c = 0; c < 3; ++c) {
      planes.push_back(tophat_enhance(out.normalized.plane(c), config.enhance_radius));
    }
    out.tmpl = build_template(RasterImage(std::move(planes)), out.geometry, config.ev);
  } else {
    out.tmpl = build_template(out.normalized, out.geometry, config.ev);
  }
  return out;
}

void IdentifyParams::validate() const {
  if (!(ev >= kEvMin && ev <= kEvMax)) {
    throw Error(Errc::EvOutOfRange, "exposure value must lie in [0.51, 0.53]");
  }
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (mode == MatchMode::Manual) {
    if (channels.empty()) throw Error(Errc::NoChannels, "manual mode needs channels");
    if (fusion == Fusion::Single && channels.size() != 1) {
      throw Error(Errc::InvalidArgument, "SINGLE fusion takes exactly one channel");
    }
  }
}

MatchParams IdentifyParams::match_params() const {
  return MatchParams{mode, channels, fusion, quadrant, decision_threshold};
}

ProbeCache::ProbeCache(std::chrono::seconds ttl, std::size_t capacity,
                       std::function<Clock::time_point()> now)
    : ttl_(ttl), capacity_(std::max<std::size_t>(capacity, 1)), now_(std::move(now)) {
  std::random_device rd;
  for (auto& s : token_state_) s = (std::uint64_t{rd()} << 32) ^ rd();
}

std::string ProbeCache::new_token() {
  char buf[33];
  const auto a = synth::mix_seed(token_state_[0]++, token_state_[1]);
  const auto b = synth::mix_seed(token_state_[1]++, a);
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return buf;
}

std::string ProbeCache::put(IrisTemplate probe) {
  std::lock_guard lock(mutex_);
  const auto now = now_();
  std::string token = new_token();
  while (slots_.contains(token)) token = new_token();
  while (slots_.size() >= capacity_) {
    slots_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(token);
  slots_.emplace(token, Slot{std::make_shared<const IrisTemplate>(std::move(probe)), now, lru_.begin()});
  return token;
}

std::shared_ptr<const IrisTemplate> ProbeCache::get(const std::string& token) {
  std::lock_guard lock(mutex_);
  const auto it = slots_.find(token);
  if (it == slots_.end()) throw Error(Errc::ExpiredToken, "unknown or evicted probe token");
  if (now_() - it->second.stored > ttl_) {
    lru_.erase(it->second.lru);
    slots_.erase(it);
    throw Error(Errc::ExpiredToken, "probe token expired");
  }
  lru_.splice(lru_.begin(), lru_, it->second.lru);
  return it->second.tmpl;
}

std::size_t ProbeCache::size() const {
  std::lock_guard lock(mutex_);
  return slots_.size();
}

Engine::Engine(IndexStore& store, EngineConfig config)
    : store_(store), config_(config), cache_(config.probe_ttl, config.probe_cache_capacity) {}

std::vector<EnrolledEye> Engine::enroll(const EnrollRequest& request) {
  const auto& id = request.identity;
  if (id.name.empty() || id.national_id.empty() || id.address.empty()) {
    throw Error(Errc::InvalidArgument, "name, national_id and address are required");
  }
  if (!request.left && !request.right) throw Error(Errc::InvalidArgument, "no eye image supplied");
  EngineConfig cfg = config_;
  cfg.ev = request.ev;

  std::vector<EnrollmentRecord> records;
  for (const auto& [eye, image] : {std::pair{Eye::Left, &request.left}, {Eye::Right, &request.right}}) {
    if (!*image) continue;
    ProcessedImage p = process_image((*image)->image, cfg);
    EnrollmentRecord r;
    r.identity = id;
    r.eye = eye;
    r.code = p.code;
    r.tmpl = std::move(p.tmpl);
    r.image_ref = (*image)->image_ref;
    records.push_back(std::move(r));
  }
  std::lock_guard lock(enroll_mutex_);
  std::vector<EnrolledEye> out;
  for (const auto& r : records) out.push_back({store_.insert(r), r.code, r.eye});
  return out;
}

IdentifyResult Engine::identify(const RasterImage& probe, const IdentifyParams& params) {
  params.validate();
  if (store_.size() == 0) throw Error(Errc::EmptyStore, "store has no records");
  EngineConfig cfg = config_;
  cfg.ev = params.ev;
  ProcessedImage p = process_image(probe, cfg);

  const MatchParams match = params.match_params();
  IdentifyResult result;
  result.probe_code = p.code;
  for (const auto& c : store_.candidates(p.code, params.k)) {
    const EnrollmentRecord record = store_.get(c.id);
    result.results.push_back({c.id, c.distance, match_score(p.tmpl, record.tmpl, match), 0});
  }
  std::sort(result.results.begin(), result.results.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.score.hd_fused != b.score.hd_fused) return a.score.hd_fused < b.score.hd_fused;
    if (a.code_distance != b.code_distance) return a.code_distance < b.code_distance;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < result.results.size(); ++i) result.results[i].rank = static_cast<int>(i + 1);
  result.probe_token = cache_.put(std::move(p.tmpl));
  return result;
}

MatchScore Engine::rescore(const std::string& probe_token, RecordId id, const MatchParams& params) {
  const auto probe = cache_.get(probe_token);
  const EnrollmentRecord record = store_.get(id);
  return match_score(*probe, record.tmpl, params);
}

namespace {

struct GalleryEntry {
  HnirCode code;
  IrisTemplate tmpl;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

BenchReport bench(const BenchOptions& options) {
  if (options.gallery_size < 100) throw Error(Errc::InvalidArgument, "bench needs N >= 100");
  if (options.probes < 1 || options.probes > options.gallery_size) {
    throw Error(Errc::InvalidArgument, "probe count must be in [1, N]");
  }
  if (options.k < 1 || options.runs < 1) throw Error(Errc::InvalidArgument, "k and runs must be positive");

  const auto gallery_items =
      synth::generate_gallery(options.gallery_size, options.seed, options.noise_sigma);
  std::vector<GalleryEntry> gallery;
  KeyDirectory directory;
  std::vector<std::pair<RecordId, int>> id_to_index;
  for (int i = 0; i < options.gallery_size; ++i) {
    ProcessedImage p = process_image(gallery_items[i].enroll.image, options.config);
    const RecordId id{p.code.as_key(), directory.next_seq(p.code.as_key())};
    directory.add(id, static_cast<std::uint64_t>(i));
    gallery.push_back({p.code, std::move(p.tmpl)});
  }
  // Probes are spread evenly over the identities.
  std::vector<std::pair<int, GalleryEntry>> probes;
  for (int j = 0; j < options.probes; ++j) {
    const int identity = static_cast<int>(static_cast<std::int64_t>(j) * options.gallery_size / options.probes);
    ProcessedImage p = process_image(gallery_items[identity].probe.image, options.config);
    probes.push_back({identity, {p.code, std::move(p.tmpl)}});
  }

  BenchReport report;
  report.gallery_size = options.gallery_size;
  report.probes = options.probes;
  report.k = options.k;
  report.runs = options.runs;
  const std::size_t k = std::min<std::size_t>(options.k, gallery.size());

  int exhaustive_hits = 0, indexed_hits = 0, recalled = 0;
  std::int64_t exhaustive_cmp = 0, indexed_cmp = 0;
  const auto exhaustive_pass = [&](bool tally) {
    for (const auto& [identity, probe] : probes) {
      int best = -1;
      double best_hd = 2.0;
      for (std::size_t i = 0; i < gallery.size(); ++i) {
        const double hd = match_score(probe.tmpl, gallery[i].tmpl, options.match).hd_fused;
        if (hd < best_hd) best_hd = hd, best = static_cast<int>(i);
      }
      if (tally) {
        exhaustive_cmp += static_cast<std::int64_t>(gallery.size());
        exhaustive_hits += best == identity;
      }
    }
  };
  const auto indexed_pass = [&](bool tally) {
    for (const auto& [identity, probe] : probes) {
      int best = -1;
      double best_hd = 2.0;
      bool present = false;
      for (const auto& c : directory.candidates(probe.code, k)) {
        const int i = static_cast<int>(directory.find(c.id)->offset);
        present |= i == identity;
        const double hd = match_score(probe.tmpl, gallery[i].tmpl, options.match).hd_fused;
        if (hd < best_hd) best_hd = hd, best = i;
      }
      if (tally) {
        indexed_cmp += static_cast<std::int64_t>(k);
        indexed_hits += best == identity;
        recalled += present;
      }
    }
  };

  using Clock = std::chrono::steady_clock;
  const auto timed = [](auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  exhaustive_pass(true);
  indexed_pass(true);
  std::vector<double> exhaustive_times, indexed_times;
  for (int run = 0; run < options.runs; ++run) {
    exhaustive_times.push_back(timed([&] { exhaustive_pass(false); }));
    indexed_times.push_back(timed([&] { indexed_pass(false); }));
  }

  const double n_probes = options.probes;
  report.exhaustive_comparisons = exhaustive_cmp;
  report.indexed_comparisons = indexed_cmp;
  report.comparison_reduction_fraction =
      1.0 - static_cast<double>(indexed_cmp) / static_cast<double>(exhaustive_cmp);
  report.exhaustive_wall_time = median(exhaustive_times);
  report.indexed_wall_time = median(indexed_times);
  report.time_ratio = report.indexed_wall_time / report.exhaustive_wall_time;
  report.recall_at_k = recalled / n_probes;
  report.exhaustive_rank1 = exhaustive_hits / n_probes;
  report.indexed_rank1 = indexed_hits / n_probes;
  return report;
}

}  // namespace hnir
