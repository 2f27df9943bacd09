#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hnir/codec.hpp"
#include "hnir/geometry.hpp"
#include "hnir/imaging.hpp"
#include "hnir/store.hpp"
#include "hnir/template.hpp"

namespace hnir {

inline constexpr std::size_t kDefaultCandidates = 32;

struct EngineConfig {
  double ev = kDefaultEv;
  double ratio_threshold = kDefaultRatioThreshold;
  bool nir_proxy = true;
  /// Apply the top-hat filter to each crop channel before binarization.
  bool enhance = false;
  int enhance_radius = kDefaultTophatRadius;
  LocateOptions locate;
  std::chrono::seconds probe_ttl{15 * 60};
  std::size_t probe_cache_capacity = 256;
};

/// Everything derived from one eye image.
struct ProcessedImage {
  IrisGeometry geometry;
  RasterImage normalized;
  HnirCode code;
  IrisTemplate tmpl;
};

/// load/split -> locate -> normalize -> code -> template
ProcessedImage process_image(const RasterImage& img, const EngineConfig& config = {});

struct IdentifyParams {
  MatchMode mode = MatchMode::Auto;
  ChannelSet channels = ChannelSet::all();
  Fusion fusion = Fusion::Union;
  Quadrant quadrant = Quadrant::Whole;
  std::size_t k = kDefaultCandidates;
  double ev = kDefaultEv;
  double decision_threshold = kDefaultDecisionThreshold;

  void validate() const;
  MatchParams match_params() const;
};

struct MatchResult {
  RecordId id;
  int code_distance = 0;
  MatchScore score;
  int rank = 0;
};

struct IdentifyResult {
  std::string probe_token;
  HnirCode probe_code;
  std::vector<MatchResult> results;
};

/// Probe templates kept for rescoring: TTL expiry plus LRU eviction.
class ProbeCache {
 public:
  using Clock = std::chrono::steady_clock;

  ProbeCache(std::chrono::seconds ttl, std::size_t capacity,
             std::function<Clock::time_point()> now = Clock::now);

  std::string put(IrisTemplate probe);
  /// Throws ExpiredToken for unknown, evicted or expired tokens.
  std::shared_ptr<const IrisTemplate> get(const std::string& token);
  std::size_t size() const;

 private:
  struct Slot {
    std::shared_ptr<const IrisTemplate> tmpl;
    Clock::time_point stored;
    std::list<std::string>::iterator lru;
  };

  std::string new_token();

  std::chrono::seconds ttl_;
  std::size_t capacity_;
  std::function<Clock::time_point()> now_;
  mutable std::mutex mutex_;
  std::list<std::string> lru_;
  std::unordered_map<std::string, Slot> slots_;
  std::uint64_t token_state_[2];
};

struct EyeImage {
  RasterImage image;
  std::string image_ref;
};

struct EnrollRequest {
  Identity identity;
  std::optional<EyeImage> left;
  std::optional<EyeImage> right;
  double ev = kDefaultEv;
};

struct EnrolledEye {
  RecordId id;
  HnirCode code;
  Eye eye = Eye::Left;
};

class Engine {
 public:
  explicit Engine(IndexStore& store, EngineConfig config = {});

  /// Processes every supplied eye before inserting any of them.
  std::vector<EnrolledEye> enroll(const EnrollRequest& request);
  IdentifyResult identify(const RasterImage& probe, const IdentifyParams& params = {});
  MatchScore rescore(const std::string& probe_token, RecordId id, const MatchParams& params);

  IndexStore& store() noexcept { return store_; }
  const EngineConfig& config() const noexcept { return config_; }
  ProbeCache& probe_cache() noexcept { return cache_; }

 private:
  IndexStore& store_;
  EngineConfig config_;
  ProbeCache cache_;
  std::mutex enroll_mutex_;
};

struct BenchOptions {
  int gallery_size = 1000;
  int probes = 100;
  std::size_t k = kDefaultCandidates;
  double noise_sigma = 8.0;
  std::uint64_t seed = 42;
  int runs = 5;
  MatchParams match;
  EngineConfig config;
};

struct BenchReport {
  int gallery_size = 0;
  int probes = 0;
  std::size_t k = 0;
  int runs = 0;
  std::int64_t exhaustive_comparisons = 0;
  std::int64_t indexed_comparisons = 0;
  /// Median seconds per full pass over all probes.
  double exhaustive_wall_time = 0;
  double indexed_wall_time = 0;
  double comparison_reduction_fraction = 0;
  double time_ratio = 0;
  double recall_at_k = 0;
  double exhaustive_rank1 = 0;
  double indexed_rank1 = 0;
};

/// Exhaustive versus code-indexed identification over a generated gallery.
/// One warm-up pass is discarded; times are medians over `runs` passes.
BenchReport bench(const BenchOptions& options);

}  // namespace hnir
