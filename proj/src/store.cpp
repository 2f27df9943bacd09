#include "hnir/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <mutex>
#include <shared_mutex>

#include "hnir/error.hpp"

namespace hnir {

std::string RecordId::to_string() const {
  return HnirCode::from_key(code_key).to_hex() + "-" + std::to_string(seq);
}

RecordId RecordId::parse(std::string_view text) {
  const auto dash = text.find('-');
  if (dash != 16 || text.size() < 18) throw Error(Errc::InvalidArgument, "bad record id");
  RecordId id;
  id.code_key = HnirCode::from_hex(text.substr(0, 16)).as_key();
  unsigned seq = 0;
  const auto tail = text.substr(17);
  const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), seq);
  if (ec != std::errc{} || ptr != tail.data() + tail.size() || seq > 0xFFFF) {
    throw Error(Errc::InvalidArgument, "bad record id sequence");
  }
  id.seq = static_cast<std::uint16_t>(seq);
  return id;
}

std::string_view to_string(Eye eye) noexcept { return eye == Eye::Left ? "LEFT" : "RIGHT"; }

void KeyDirectory::add(RecordId id, std::uint64_t offset) {
  const auto pos = std::lower_bound(entries_.begin(), entries_.end(), id,
                                    [](const Entry& e, const RecordId& r) { return e.id < r; });
  if (pos != entries_.end() && pos->id == id) {
    throw Error(Errc::InvalidArgument, "duplicate record id " + id.to_string());
  }
  entries_.insert(pos, Entry{id, offset});
}

std::uint16_t KeyDirectory::next_seq(std::uint64_t code_key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), RecordId{code_key, 0},
                             [](const Entry& e, const RecordId& r) { return e.id < r; });
  std::uint32_t seq = 0;
  for (; it != entries_.end() && it->id.code_key == code_key && it->id.seq == seq; ++it) ++seq;
  if (seq > 0xFFFF) throw Error(Errc::StoreFull, "sequence space exhausted for code");
  return static_cast<std::uint16_t>(seq);
}

const KeyDirectory::Entry* KeyDirectory::find(RecordId id) const {
  const auto pos = std::lower_bound(entries_.begin(), entries_.end(), id,
                                    [](const Entry& e, const RecordId& r) { return e.id < r; });
  return pos != entries_.end() && pos->id == id ? &*pos : nullptr;
}

namespace {

int key_distance(std::uint64_t a, std::uint64_t b) noexcept {
  int d = 0;
  for (int i = 0; i < 8; ++i) {
    const int x = static_cast<int>(a & 0xff), y = static_cast<int>(b & 0xff);
    d += x > y ? x - y : y - x;
    a >>= 8;
    b >>= 8;
  }
  return d;
}

}  // namespace

std::vector<Candidate> KeyDirectory::candidates(const HnirCode& probe, std::size_t k) const {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
  const std::uint64_t key = probe.as_key();
  std::vector<Candidate> all;
  all.reserve(entries_.size());
  for (const auto& e : entries_) all.push_back({e.id, key_distance(key, e.id.code_key)});
  const auto less = [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  const auto keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), less);
  all.resize(keep);
  return all;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(Errc::CorruptStore, "record body truncated");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::string str() {
    const auto n = u32();
    auto b = take(n);
    return std::string(b.begin(), b.end());
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kPlaneBytes = (kCropWidth + 7) / 8 * kCropHeight;

void require_storable(const IrisTemplate& t) {
  for (const BitPlane* p : {&t.r, &t.g, &t.b, &t.mask}) {
    if (p->width() != kCropWidth || p->height() != kCropHeight) {
      throw Error(Errc::DimensionMismatch, "stored templates must be 335x235");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_log_entry(const EnrollmentRecord& record) {
  require_storable(record.tmpl);
  std::vector<std::uint8_t> body;
  body.reserve(4 * kPlaneBytes + 256);
  for (auto b : record.code.bytes()) body.push_back(b);
  put_u16(body, record.id.seq);
  body.push_back(static_cast<std::uint8_t>(record.eye));
  put_string(body, record.identity.name);
  put_string(body, record.identity.national_id);
  put_string(body, record.identity.address);
  put_string(body, record.image_ref);
  const auto& g = record.tmpl.geometry;
  for (int v : {g.x0, g.y0, g.r_pupil, g.r_iris, g.d_h, g.d_v}) {
    put_u32(body, static_cast<std::uint32_t>(v));
  }
  for (const BitPlane* p : {&record.tmpl.r, &record.tmpl.g, &record.tmpl.b, &record.tmpl.mask}) {
    body.insert(body.end(), p->bytes().begin(), p->bytes().end());
  }
  std::vector<std::uint8_t> entry;
  entry.reserve(body.size() + 8);
  put_u32(entry, static_cast<std::uint32_t>(body.size() + 4));
  entry.insert(entry.end(), body.begin(), body.end());
  put_u32(entry, crc32_of(body));
  return entry;
}

EnrollmentRecord decode_log_entry_body(std::span<const std::uint8_t> body) {
  Reader in(body);
  EnrollmentRecord r;
  HnirCode::Bytes code{};
  auto cb = in.take(8);
  std::copy(cb.begin(), cb.end(), code.begin());
  r.code = HnirCode(code);
  r.id = RecordId{r.code.as_key(), in.u16()};
  const auto eye = in.u8();
  if (eye > 1) throw Error(Errc::CorruptStore, "bad eye byte");
  r.eye = static_cast<Eye>(eye);
  r.identity.name = in.str();
  r.identity.national_id = in.str();
  r.identity.address = in.str();
  r.image_ref = in.str();
  int g[6];
  for (int& v : g) v = static_cast<std::int32_t>(in.u32());
  r.tmpl.geometry.x0 = g[0];
  r.tmpl.geometry.y0 = g[1];
  r.tmpl.geometry.r_pupil = g[2];
  r.tmpl.geometry.r_iris = g[3];
  r.tmpl.geometry.d_h = g[4];
  r.tmpl.geometry.d_v = g[5];
  r.tmpl.geometry.area_pixels = std::int64_t{g[4]} * g[5];
  for (BitPlane* p : {&r.tmpl.r, &r.tmpl.g, &r.tmpl.b, &r.tmpl.mask}) {
    auto bytes = in.take(kPlaneBytes);
    *p = BitPlane(kCropWidth, kCropHeight, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  }
  if (!in.done()) throw Error(Errc::CorruptStore, "trailing bytes in record body");
  return r;
}

namespace {

class File {
 public:
  File() = default;
  explicit File(int fd) : fd_(fd) {}
  File(File&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  File& operator=(File&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~File() { close(); }

  int fd() const noexcept { return fd_; }

  void read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
    std::size_t done = 0;
    while (done < out.size()) {
      const auto n = ::pread(fd_, out.data() + done, out.size() - done,
                             static_cast<off_t>(offset + done));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(Errc::IoFailure, "store read failed");
      done += static_cast<std::size_t>(n);
    }
  }

  void write_at(std::uint64_t offset, std::span<const std::uint8_t> bytes) const {
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto n = ::pwrite(fd_, bytes.data() + done, bytes.size() - done,
                              static_cast<off_t>(offset + done));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(Errc::IoFailure, std::string("store write failed: ") + std::strerror(errno));
      done += static_cast<std::size_t>(n);
    }
  }

  void sync() const {
    if (::fdatasync(fd_) != 0) throw Error(Errc::IoFailure, "fdatasync failed");
  }

  std::uint64_t size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw Error(Errc::IoFailure, "fstat failed");
    return static_cast<std::uint64_t>(st.st_size);
  }

  void truncate(std::uint64_t size) const {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) throw Error(Errc::IoFailure, "ftruncate failed");
  }

 private:
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

std::vector<std::uint8_t> encode_header(std::uint64_t count) {
  std::vector<std::uint8_t> h{'H', 'N', 'I', 'R', kStoreVersion};
  put_u64(h, count);
  put_u32(h, crc32_of(h));
  return h;
}

}  // namespace

struct IndexStore::Impl {
  std::filesystem::path path;
  File file;
  std::uint64_t end = kStoreHeaderSize;
  KeyDirectory directory;
  mutable std::shared_mutex directory_mutex;
  std::mutex write_mutex;
  mutable std::atomic<std::uint64_t> bytes_read{0};

  void write_header(std::uint64_t count) const { file.write_at(0, encode_header(count)); }

  void replay() {
    std::vector<std::uint8_t> header(kStoreHeaderSize);
    const std::uint64_t size = file.size();
    if (size < kStoreHeaderSize) throw Error(Errc::CorruptStore, "store header truncated");
    file.read_at(0, header);
    if (!std::equal(header.begin(), header.begin() + 4, "HNIR")) {
      throw Error(Errc::CorruptStore, "bad store magic");
    }
    if (header[4] != kStoreVersion) throw Error(Errc::VersionMismatch, "unsupported store version");
    std::uint32_t stored_crc = 0;
    for (int i = 3; i >= 0; --i) stored_crc = (stored_crc << 8) | header[13 + i];
    if (crc32_of(std::span(header).first(13)) != stored_crc) {
      throw Error(Errc::CorruptStore, "store header checksum mismatch");
    }
    std::uint64_t acknowledged = 0;
    for (int i = 7; i >= 0; --i) acknowledged = (acknowledged << 8) | header[5 + i];

    // Entries are appended and synced before the header count moves, so a
    // torn or checksum-failing tail is an unacknowledged write.
    std::uint64_t pos = kStoreHeaderSize;
    std::uint64_t count = 0;
    std::vector<std::uint8_t> buf;
    while (size - pos >= 4) {
      std::uint8_t len_bytes[4];
      file.read_at(pos, len_bytes);
      const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                                (static_cast<std::uint32_t>(len_bytes[3]) << 24);
      if (len < 4 || size - pos - 4 < len) break;
      buf.resize(len);
      file.read_at(pos + 4, buf);
      const auto body = std::span(buf).first(len - 4);
      std::uint32_t crc = 0;
      for (int i = 3; i >= 0; --i) crc = (crc << 8) | buf[len - 4 + i];
      if (crc32_of(body) != crc) break;
      if (body.size() < 10) break;
      HnirCode::Bytes code{};
      std::copy(body.begin(), body.begin() + 8, code.begin());
      const RecordId id{HnirCode(code).as_key(), static_cast<std::uint16_t>(body[8] | (body[9] << 8))};
      directory.add(id, pos);
      pos += 4 + len;
      ++count;
    }
    if (count < acknowledged) {
      throw Error(Errc::CorruptStore, "log holds fewer records than the header acknowledges");
    }
    if (pos != size) {
      file.truncate(pos);
      file.sync();
    }
    if (count != acknowledged) {
      write_header(count);
      file.sync();
    }
    end = pos;
  }
};

IndexStore::IndexStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
IndexStore::IndexStore(IndexStore&&) noexcept = default;
IndexStore& IndexStore::operator=(IndexStore&&) noexcept = default;
IndexStore::~IndexStore() = default;

IndexStore IndexStore::open(const std::filesystem::path& dir, bool create_if_missing) {
  std::error_code ec;
  if (!std::filesystem::exists(dir, ec)) {
    if (!create_if_missing) throw Error(Errc::IoFailure, "store directory missing: " + dir.string());
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  } else if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(Errc::IoFailure, dir.string() + " is not a directory");
  }
  auto impl = std::make_unique<Impl>();
  impl->path = dir / kStoreFileName;
  const bool fresh = !std::filesystem::exists(impl->path, ec);
  if (fresh && !create_if_missing) throw Error(Errc::IoFailure, "store file missing");
  const int fd = ::open(impl->path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::IoFailure, "cannot open " + impl->path.string());
  impl->file = File(fd);
  if (fresh || impl->file.size() == 0) {
    impl->write_header(0);
    impl->file.sync();
  }
  impl->replay();
  return IndexStore(std::move(impl));
}

RecordId IndexStore::insert(const EnrollmentRecord& record) {
  std::lock_guard write_lock(impl_->write_mutex);
  EnrollmentRecord stored = record;
  const std::uint64_t key = record.code.as_key();
  {
    std::shared_lock read_lock(impl_->directory_mutex);
    stored.id = RecordId{key, impl_->directory.next_seq(key)};
  }
  const auto entry = encode_log_entry(stored);
  const std::uint64_t offset = impl_->end;
  try {
    impl_->file.write_at(offset, entry);
    impl_->file.sync();
  } catch (...) {
    impl_->file.truncate(offset);
    throw;
  }
  {
    std::unique_lock lock(impl_->directory_mutex);
    impl_->directory.add(stored.id, offset);
    impl_->end = offset + entry.size();
  }
  impl_->write_header(size());
  impl_->file.sync();
  return stored.id;
}

std::vector<Candidate> IndexStore::candidates(const HnirCode& probe, std::size_t k) const {
  std::shared_lock lock(impl_->directory_mutex);
  if (impl_->directory.empty()) throw Error(Errc::EmptyStore, "store has no records");
  return impl_->directory.candidates(probe, k);
}

EnrollmentRecord IndexStore::get(RecordId id) const {
  std::uint64_t offset;
  {
    std::shared_lock lock(impl_->directory_mutex);
    const auto* e = impl_->directory.find(id);
    if (!e) throw Error(Errc::NotFound, "no record " + id.to_string());
    offset = e->offset;
  }
  std::uint8_t len_bytes[4];
  impl_->file.read_at(offset, len_bytes);
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::vector<std::uint8_t> buf(len);
  impl_->file.read_at(offset + 4, buf);
  impl_->bytes_read += len;
  const auto body = std::span(buf).first(len - 4);
  std::uint32_t crc = 0;
  for (int i = 3; i >= 0; --i) crc = (crc << 8) | buf[len - 4 + i];
  if (crc32_of(body) != crc) throw Error(Errc::CorruptStore, "record checksum mismatch");
  return decode_log_entry_body(body);
}

std::vector<RecordId> IndexStore::scan() const {
  std::shared_lock lock(impl_->directory_mutex);
  std::vector<RecordId> ids;
  ids.reserve(impl_->directory.size());
  for (const auto& e : impl_->directory.entries()) ids.push_back(e.id);
  return ids;
}

std::size_t IndexStore::size() const {
  std::shared_lock lock(impl_->directory_mutex);
  return impl_->directory.size();
}

std::uint64_t IndexStore::record_bytes_read() const noexcept { return impl_->bytes_read.load(); }

const std::filesystem::path& IndexStore::path() const noexcept { return impl_->path; }

}  // namespace hnir
