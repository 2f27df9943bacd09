#include <doctest.h>

#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include <zlib.h>

#include "hnir/error.hpp"
#include "hnir/store.hpp"
#include "support.hpp"

using namespace hnir;
using testing::Rng;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hnir::Error");
  return Errc::InvalidArgument;
}

EnrollmentRecord make_record(Rng& rng, const HnirCode& code, const std::string& name = "Ada") {
  EnrollmentRecord r;
  r.identity = {name, "NID-" + std::to_string(rng() % 100000), "1 Long Road"};
  r.eye = rng() % 2 ? Eye::Right : Eye::Left;
  r.code = code;
  r.tmpl = testing::random_template(rng);
  r.tmpl.geometry = IrisGeometry::from_circles(150 + static_cast<int>(rng() % 20), 110, 21, 66);
  r.image_ref = "images/" + std::to_string(rng() % 1000) + ".ppm";
  return r;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Independent writer for one log entry, straight from the format description.
struct Writer {
  std::vector<std::uint8_t> out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    le(s.size(), 4);
    out.insert(out.end(), s.begin(), s.end());
  }
  void plane(const BitPlane& p) {
    for (int y = 0; y < p.height(); ++y) {
      for (int bx = 0; bx < (p.width() + 7) / 8; ++bx) {
        std::uint8_t byte = 0;
        for (int k = 0; k < 8; ++k) {
          const int x = bx * 8 + k;
          if (x < p.width() && p.get(x, y)) byte |= static_cast<std::uint8_t>(0x80 >> k);
        }
        out.push_back(byte);
      }
    }
  }
};

std::uint32_t crc(const std::vector<std::uint8_t>& v) {
  return static_cast<std::uint32_t>(::crc32(0L, v.data(), static_cast<uInt>(v.size())));
}

std::vector<std::uint8_t> oracle_entry(const EnrollmentRecord& r) {
  Writer body;
  for (int i = 0; i < 8; ++i) body.u8(static_cast<std::uint8_t>(r.code.as_key() >> (56 - 8 * i)));
  body.le(r.id.seq, 2);
  body.u8(r.eye == Eye::Left ? 0 : 1);
  body.str(r.identity.name);
  body.str(r.identity.national_id);
  body.str(r.identity.address);
  body.str(r.image_ref);
  const auto& g = r.tmpl.geometry;
  for (int v : {g.x0, g.y0, g.r_pupil, g.r_iris, g.d_h, g.d_v}) body.le(static_cast<std::uint32_t>(v), 4);
  body.plane(r.tmpl.r);
  body.plane(r.tmpl.g);
  body.plane(r.tmpl.b);
  body.plane(r.tmpl.mask);
  Writer entry;
  entry.le(body.out.size() + 4, 4);
  entry.out.insert(entry.out.end(), body.out.begin(), body.out.end());
  entry.le(crc(body.out), 4);
  return entry.out;
}

std::vector<std::uint8_t> oracle_header(std::uint64_t count) {
  Writer h;
  for (char c : {'H', 'N', 'I', 'R'}) h.u8(static_cast<std::uint8_t>(c));
  h.u8(1);
  h.le(count, 8);
  h.le(crc(h.out), 4);
  return h.out;
}

std::vector<Candidate> brute_candidates(const std::vector<RecordId>& ids, const HnirCode& probe,
                                        std::size_t k) {
  std::vector<Candidate> all;
  for (const auto& id : ids) all.push_back({id, testing::l1_oracle(HnirCode::from_key(id.code_key), probe)});
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST_SUITE("store") {

TEST_CASE("record id text form") {
  const RecordId id{0x0102030405060708ULL, 17};
  CHECK(id.to_string() == "0102030405060708-17");
  CHECK(RecordId::parse("0102030405060708-17") == id);
  CHECK(code_of([] { RecordId::parse("0102030405060708"); }) == Errc::InvalidArgument);
  CHECK(code_of([] { RecordId::parse("0102030405060708-70000"); }) == Errc::InvalidArgument);
  CHECK(code_of([] { RecordId::parse("01020304050607-1"); }) == Errc::InvalidArgument);
}

TEST_CASE("create on an empty directory") {
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  CHECK(store.size() == 0);
  CHECK(store.scan().empty());
  CHECK(read_file(dir.path() / "hnir.db") == oracle_header(0));
  CHECK(code_of([&] { store.candidates(HnirCode{}, 3); }) == Errc::EmptyStore);
}

TEST_CASE("missing or unusable locations") {
  testing::TempDir dir;
  CHECK(code_of([&] { IndexStore::open(dir.path() / "absent", false); }) == Errc::IoFailure);
  write_file(dir.path() / "plain", {1, 2, 3});
  CHECK(code_of([&] { IndexStore::open(dir.path() / "plain"); }) == Errc::IoFailure);
}

TEST_CASE("reopen after three inserts") {
  Rng rng(61);
  testing::TempDir dir;
  std::vector<EnrollmentRecord> written;
  {
    IndexStore store = IndexStore::open(dir.path());
    for (int i = 0; i < 3; ++i) {
      EnrollmentRecord r = make_record(rng, testing::random_code(rng));
      r.id = store.insert(r);
      written.push_back(r);
    }
  }
  IndexStore store = IndexStore::open(dir.path(), false);
  CHECK(store.size() == 3);
  for (const auto& r : written) CHECK(store.get(r.id) == r);
}

TEST_CASE("file bytes match an independent serializer") {
  Rng rng(62);
  testing::TempDir dir;
  std::vector<std::uint8_t> expect;
  {
    IndexStore store = IndexStore::open(dir.path());
    for (int i = 0; i < 4; ++i) {
      EnrollmentRecord r = make_record(rng, testing::random_code(rng), i % 2 ? "" : "Zoë Ünicode");
      r.id = store.insert(r);
      const auto entry = oracle_entry(r);
      CHECK(encode_log_entry(r) == entry);
      expect.insert(expect.end(), entry.begin(), entry.end());
    }
  }
  auto header = oracle_header(4);
  expect.insert(expect.begin(), header.begin(), header.end());
  CHECK(read_file(dir.path() / "hnir.db") == expect);
}

TEST_CASE("decode round-trips an encoded body") {
  Rng rng(63);
  EnrollmentRecord r = make_record(rng, testing::random_code(rng));
  r.id = {r.code.as_key(), 9};
  const auto entry = encode_log_entry(r);
  const auto decoded = decode_log_entry_body(std::span(entry).subspan(4, entry.size() - 8));
  CHECK(decoded == r);
}

TEST_CASE("only full-size templates are storable") {
  Rng rng(64);
  EnrollmentRecord r = make_record(rng, testing::random_code(rng));
  r.tmpl.g = BitPlane(10, 10);
  CHECK(code_of([&] { encode_log_entry(r); }) == Errc::DimensionMismatch);
}

TEST_CASE("header damage") {
  Rng rng(65);
  testing::TempDir dir;
  { IndexStore::open(dir.path()).insert(make_record(rng, testing::random_code(rng))); }
  const auto good = read_file(dir.path() / "hnir.db");
  auto bytes = good;
  bytes[0] = 'X';
  write_file(dir.path() / "hnir.db", bytes);
  CHECK(code_of([&] { IndexStore::open(dir.path()); }) == Errc::CorruptStore);

  bytes = good;
  bytes[4] = 2;
  write_file(dir.path() / "hnir.db", bytes);
  CHECK(code_of([&] { IndexStore::open(dir.path()); }) == Errc::VersionMismatch);

  bytes = good;
  bytes[6] ^= 1;
  write_file(dir.path() / "hnir.db", bytes);
  CHECK(code_of([&] { IndexStore::open(dir.path()); }) == Errc::CorruptStore);

  write_file(dir.path() / "hnir.db", std::vector<std::uint8_t>(good.begin(), good.begin() + 10));
  CHECK(code_of([&] { IndexStore::open(dir.path()); }) == Errc::CorruptStore);
}

TEST_CASE("acknowledged record lost from the log is CorruptStore") {
  Rng rng(66);
  testing::TempDir dir;
  { IndexStore::open(dir.path()).insert(make_record(rng, testing::random_code(rng))); }
  auto bytes = read_file(dir.path() / "hnir.db");
  bytes.resize(bytes.size() - 1);
  write_file(dir.path() / "hnir.db", bytes);
  CHECK(code_of([&] { IndexStore::open(dir.path()); }) == Errc::CorruptStore);
}

TEST_CASE("collision policy assigns the smallest unused seq") {
  Rng rng(67);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  const HnirCode k = testing::random_code(rng);
  CHECK(store.insert(make_record(rng, k)) == RecordId{k.as_key(), 0});
  CHECK(store.insert(make_record(rng, k)) == RecordId{k.as_key(), 1});
  const HnirCode other = testing::random_code(rng);
  CHECK(store.insert(make_record(rng, other)).seq == 0);
  CHECK(store.insert(make_record(rng, k)) == RecordId{k.as_key(), 2});

  KeyDirectory d;
  d.add({5, 0});
  d.add({5, 2});
  CHECK(d.next_seq(5) == 1);
  CHECK(d.next_seq(6) == 0);
}

TEST_CASE("seq overflow is StoreFull") {
  KeyDirectory d;
  for (std::uint32_t s = 0; s <= 0xFFFF; ++s) d.add({42, static_cast<std::uint16_t>(s)});
  CHECK(code_of([&] { d.next_seq(42); }) == Errc::StoreFull);
  CHECK(d.next_seq(43) == 0);
}

TEST_CASE("truncating the trailing entry at every byte boundary") {
  Rng rng(68);
  testing::TempDir dir;
  std::vector<EnrollmentRecord> acked;
  {
    IndexStore store = IndexStore::open(dir.path());
    for (int i = 0; i < 2; ++i) {
      EnrollmentRecord r = make_record(rng, testing::random_code(rng));
      r.id = store.insert(r);
      acked.push_back(r);
    }
  }
  const auto before = read_file(dir.path() / "hnir.db");
  EnrollmentRecord last = make_record(rng, testing::random_code(rng));
  last.id = {last.code.as_key(), 0};
  const auto entry = encode_log_entry(last);

  int failures = 0;
  for (std::size_t cut = 0; cut <= entry.size(); ++cut) {
    // Crash between the append and the header update: header still says 2.
    auto bytes = before;
    bytes.insert(bytes.end(), entry.begin(), entry.begin() + static_cast<std::ptrdiff_t>(cut));
    write_file(dir.path() / "hnir.db", bytes);
    IndexStore store = IndexStore::open(dir.path());
    const bool complete = cut == entry.size();
    bool ok = store.size() == (complete ? 3u : 2u);
    for (const auto& r : acked) ok = ok && store.get(r.id) == r;
    if (complete) ok = ok && store.get(last.id) == last;
    ok = ok && read_file(dir.path() / "hnir.db").size() == before.size() + (complete ? entry.size() : 0);
    failures += !ok;
  }
  CHECK(failures == 0);

  // Recovery leaves a store that accepts further appends.
  write_file(dir.path() / "hnir.db", before);
  {
    auto bytes = before;
    bytes.insert(bytes.end(), entry.begin(), entry.begin() + 100);
    write_file(dir.path() / "hnir.db", bytes);
  }
  {
    IndexStore store = IndexStore::open(dir.path());
    EnrollmentRecord r = make_record(rng, testing::random_code(rng));
    r.id = store.insert(r);
    acked.push_back(r);
  }
  IndexStore store = IndexStore::open(dir.path());
  CHECK(store.size() == 3);
  for (const auto& r : acked) CHECK(store.get(r.id) == r);
}

TEST_CASE("corrupted trailing checksum is dropped") {
  Rng rng(69);
  testing::TempDir dir;
  const auto before = [&] {
    IndexStore store = IndexStore::open(dir.path());
    store.insert(make_record(rng, testing::random_code(rng)));
    return read_file(dir.path() / "hnir.db");
  }();
  EnrollmentRecord extra = make_record(rng, testing::random_code(rng));
  auto entry = encode_log_entry(extra);
  entry.back() ^= 0xFF;
  auto bytes = before;
  bytes.insert(bytes.end(), entry.begin(), entry.end());
  write_file(dir.path() / "hnir.db", bytes);
  CHECK(IndexStore::open(dir.path()).size() == 1);
  CHECK(read_file(dir.path() / "hnir.db") == before);
}

TEST_CASE("candidate examples") {
  Rng rng(70);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  const HnirCode probe(HnirCode::Bytes{100, 100, 100, 100, 100, 100, 100, 100});
  const HnirCode near7(HnirCode::Bytes{103, 100, 96, 100, 100, 100, 100, 100});
  const HnirCode far300(HnirCode::Bytes{0, 0, 0, 100, 100, 100, 100, 100});
  const RecordId a = store.insert(make_record(rng, far300));
  const RecordId b = store.insert(make_record(rng, probe));
  const RecordId c = store.insert(make_record(rng, near7));
  const auto two = store.candidates(probe, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Candidate{b, 0});
  CHECK(two[1] == Candidate{c, 7});
  const auto all = store.candidates(probe, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[2] == Candidate{a, 300});
}

TEST_CASE("candidates do not read record bodies") {
  Rng rng(71);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  std::vector<RecordId> ids;
  for (int i = 0; i < 20; ++i) ids.push_back(store.insert(make_record(rng, testing::random_code(rng))));
  const auto before = store.record_bytes_read();
  for (int i = 0; i < 50; ++i) store.candidates(testing::random_code(rng), 5);
  CHECK(store.record_bytes_read() == before);
  store.get(ids[3]);
  CHECK(store.record_bytes_read() > before);
}

TEST_CASE("candidates equal the brute-force sort") {
  Rng rng(72);
  for (int n : {10, 1000, 10000}) {
    KeyDirectory d;
    std::vector<RecordId> ids;
    for (int i = 0; i < n; ++i) {
      // A narrow byte range forces distance ties and repeated codes.
      const HnirCode code = testing::random_code(rng, 0, 3);
      const RecordId id{code.as_key(), d.next_seq(code.as_key())};
      d.add(id, static_cast<std::uint64_t>(i));
      ids.push_back(id);
    }
    for (std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{32}, static_cast<std::size_t>(n + 5)}) {
      const HnirCode probe = testing::random_code(rng, 0, 3);
      CHECK(d.candidates(probe, k) == brute_candidates(ids, probe, k));
    }
  }
}

TEST_CASE("store candidates agree with the brute-force oracle") {
  Rng rng(73);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  std::vector<RecordId> ids;
  for (int i = 0; i < 60; ++i) ids.push_back(store.insert(make_record(rng, testing::random_code(rng, 10, 14))));
  for (int i = 0; i < 20; ++i) {
    const HnirCode probe = testing::random_code(rng, 10, 14);
    CHECK(store.candidates(probe, 9) == brute_candidates(ids, probe, 9));
  }
}

TEST_CASE("get and scan") {
  Rng rng(74);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  CHECK(code_of([&] { store.get(RecordId{1, 0}); }) == Errc::NotFound);
  std::vector<RecordId> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(store.insert(make_record(rng, testing::random_code(rng))));
  std::sort(ids.begin(), ids.end());
  CHECK(store.scan() == ids);
  CHECK(code_of([&] { store.get(RecordId{ids[0].code_key, 1}); }) == Errc::NotFound);
}

TEST_CASE("scan count after many inserts") {
  Rng rng(75);
  testing::TempDir dir;
  const int n = 1000;
  {
    IndexStore store = IndexStore::open(dir.path());
    const EnrollmentRecord base = make_record(rng, HnirCode{});
    for (int i = 0; i < n; ++i) {
      EnrollmentRecord r = base;
      r.code = testing::random_code(rng, 0, 2);
      store.insert(r);
    }
    CHECK(store.size() == static_cast<std::size_t>(n));
  }
  IndexStore store = IndexStore::open(dir.path());
  const auto ids = store.scan();
  CHECK(ids.size() == static_cast<std::size_t>(n));
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  CHECK(std::set<RecordId>(ids.begin(), ids.end()).size() == ids.size());
}

TEST_CASE("concurrent readers during inserts") {
  Rng rng(76);
  testing::TempDir dir;
  IndexStore store = IndexStore::open(dir.path());
  const EnrollmentRecord seed = make_record(rng, testing::random_code(rng));
  const RecordId first = store.insert(seed);
  EnrollmentRecord expected = seed;
  expected.id = first;
  std::atomic<bool> done{false};
  std::atomic<int> errors{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      while (!done) {
        try {
          const auto c = store.candidates(seed.code, 4);
          if (c.empty() || c[0].distance != 0) ++errors;
          if (!(store.get(first) == expected)) ++errors;
          for (const auto& id : store.scan()) store.get(id);
        } catch (...) {
          ++errors;
        }
      }
    });
  }
  for (int i = 0; i < 30; ++i) store.insert(make_record(rng, testing::random_code(rng)));
  done = true;
  for (auto& t : readers) t.join();
  CHECK(errors == 0);
  CHECK(store.size() == 31);
}

}  // TEST_SUITE
