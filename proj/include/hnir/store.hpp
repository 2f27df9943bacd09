#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hnir/codec.hpp"
#include "hnir/template.hpp"

namespace hnir {

struct RecordId {
  std::uint64_t code_key = 0;
  std::uint16_t seq = 0;

  /// "<16 hex digits>-<seq>"
  std::string to_string() const;
  static RecordId parse(std::string_view text);

  auto operator<=>(const RecordId&) const = default;
};

enum class Eye : std::uint8_t { Left = 0, Right = 1 };

std::string_view to_string(Eye eye) noexcept;

struct Identity {
  std::string name;
  std::string national_id;
  std::string address;

  bool operator==(const Identity&) const = default;
};

struct EnrollmentRecord {
  RecordId id;
  Identity identity;
  Eye eye = Eye::Left;
  HnirCode code;
  IrisTemplate tmpl;
  std::string image_ref;

  bool operator==(const EnrollmentRecord&) const = default;
};

struct Candidate {
  RecordId id;
  int distance = 0;

  bool operator==(const Candidate&) const = default;
};

/// Sorted (code_key, seq) directory; nearest-code search reads keys only.
class KeyDirectory {
 public:
  struct Entry {
    RecordId id;
    std::uint64_t offset = 0;
  };

  void add(RecordId id, std::uint64_t offset = 0);
  /// Smallest seq not yet used for `code_key`; throws StoreFull when exhausted.
  std::uint16_t next_seq(std::uint64_t code_key) const;
  const Entry* find(RecordId id) const;

  /// k smallest code distances, ties by ascending record id. Full linear pass.
  std::vector<Candidate> candidates(const HnirCode& probe, std::size_t k) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
};

inline constexpr std::string_view kStoreFileName = "hnir.db";
inline constexpr std::uint8_t kStoreVersion = 0x01;
inline constexpr std::size_t kStoreHeaderSize = 17;

/// Full log entry bytes: length prefix, body, CRC32.
std::vector<std::uint8_t> encode_log_entry(const EnrollmentRecord& record);
EnrollmentRecord decode_log_entry_body(std::span<const std::uint8_t> body);

/// Append-only enrollment log plus in-memory key directory rebuilt on open.
/// Many concurrent readers, one writer.
class IndexStore {
 public:
  static IndexStore open(const std::filesystem::path& dir, bool create_if_missing = true);

  IndexStore(IndexStore&&) noexcept;
  IndexStore& operator=(IndexStore&&) noexcept;
  ~IndexStore();

  /// Assigns (code key, seq) and returns once the entry is on disk.
  RecordId insert(const EnrollmentRecord& record);
  std::vector<Candidate> candidates(const HnirCode& probe, std::size_t k) const;
  EnrollmentRecord get(RecordId id) const;
  std::vector<RecordId> scan() const;
  std::size_t size() const;

  /// Bytes of record bodies read from disk since open.
  std::uint64_t record_bytes_read() const noexcept;
  const std::filesystem::path& path() const noexcept;

 private:
  struct Impl;
  explicit IndexStore(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace hnir
