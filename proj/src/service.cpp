#include "hnir/service.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <optional>
#include <random>

#include <httplib.h>

namespace hnir {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string_view decision(bool accept) { return accept ? "ACCEPT" : "REJECT"; }

json geometry_json(const IrisGeometry& g) {
  return {{"x0", g.x0}, {"y0", g.y0}, {"r_pupil", g.r_pupil}, {"r_iris", g.r_iris},
          {"d_h", g.d_h}, {"d_v", g.d_v}};
}

}  // namespace

json to_json(const MatchScore& s) {
  return {{"hd_r", optional_number(s.hd_r)},
          {"hd_g", optional_number(s.hd_g)},
          {"hd_b", optional_number(s.hd_b)},
          {"hd_fused", s.hd_fused},
          {"channel_used", s.channel_used.to_string()},
          {"quadrant", to_string(s.quadrant)},
          {"fusion", to_string(s.fusion)},
          {"decision", decision(s.accept)},
          {"bits_examined", s.bits_examined},
          {"valid_bits", s.valid_bits}};
}

json to_json(const IdentifyResult& result) {
  json rows = json::array();
  for (const auto& r : result.results) {
    rows.push_back({{"record_id", r.id.to_string()},
                    {"rank", r.rank},
                    {"code_distance", r.code_distance},
                    {"hd_r", optional_number(r.score.hd_r)},
                    {"hd_g", optional_number(r.score.hd_g)},
                    {"hd_b", optional_number(r.score.hd_b)},
                    {"hd_fused", r.score.hd_fused},
                    {"channel_used", r.score.channel_used.to_string()},
                    {"quadrant", to_string(r.score.quadrant)},
                    {"fusion", to_string(r.score.fusion)},
                    {"decision", decision(r.score.accept)}});
  }
  return {{"probe_token", result.probe_token},
          {"probe_code_hex", result.probe_code.to_hex()},
          {"results", std::move(rows)}};
}

json to_json(const EnrollmentRecord& record) {
  return {{"record_id", record.id.to_string()},
          {"name", record.identity.name},
          {"national_id", record.identity.national_id},
          {"address", record.identity.address},
          {"eye", to_string(record.eye)},
          {"image_ref", record.image_ref},
          {"code_hex", record.code.to_hex()},
          {"geometry", geometry_json(record.tmpl.geometry)}};
}

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::ExpiredToken: return 410;
    case Errc::IoFailure:
    case Errc::CorruptStore:
    case Errc::VersionMismatch:
    case Errc::StoreFull: return 500;
    default: return 400;
  }
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.starts_with("data:")) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw Error(Errc::InvalidArgument, "malformed data URL");
    text.remove_prefix(comma + 1);
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (const char c : text) {
    int v;
    if (c >= 'A' && c <= 'Z') v = c - 'A';
    else if (c >= 'a' && c <= 'z') v = c - 'a' + 26;
    else if (c >= '0' && c <= '9') v = c - '0' + 52;
    else if (c == '+' || c == '-') v = 62;
    else if (c == '/' || c == '_') v = 63;
    else if (c == '=') { padding = true; continue; }
    else if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    else throw Error(Errc::InvalidArgument, "invalid base64 character");
    if (padding) throw Error(Errc::InvalidArgument, "base64 data after padding");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits));
      acc &= (1u << bits) - 1;
    }
  }
  if (bits >= 6) throw Error(Errc::InvalidArgument, "truncated base64 data");
  return out;
}

namespace {

// One request's inputs, whether sent as a JSON body or as multipart fields.
class Form {
 public:
  explicit Form(const httplib::Request& req) : req_(req) {
    if (req.is_multipart_form_data()) return;
    if (req.body.empty()) {
      body_ = json::object();
      return;
    }
    try {
      body_ = json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw Error(Errc::InvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
    if (!body_.is_object()) throw Error(Errc::InvalidArgument, "request body must be a JSON object");
  }

  std::optional<std::string> text(const std::string& key) const {
    if (req_.is_multipart_form_data()) {
      if (!req_.has_file(key)) return std::nullopt;
      return req_.get_file_value(key).content;
    }
    const auto it = body_.find(key);
    if (it == body_.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_array()) {
      // ["r", "g"] is accepted for channel lists.
      std::string joined;
      for (const auto& v : *it) {
        if (!v.is_string()) throw Error(Errc::InvalidArgument, "field '" + key + "' must hold strings");
        if (!joined.empty()) joined += ',';
        joined += v.get<std::string>();
      }
      return joined;
    }
    return it->dump();
  }

  std::string required_text(const std::string& key) const {
    auto v = text(key);
    if (!v || v->empty()) throw Error(Errc::InvalidArgument, "missing field '" + key + "'");
    return *v;
  }

  std::optional<double> number(const std::string& key) const {
    const auto v = text(key);
    if (!v) return std::nullopt;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(key);
      return d;
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "field '" + key + "' must be a number");
    }
  }

  /// Raw image bytes: a multipart file part or a base64 JSON string.
  std::optional<std::vector<std::uint8_t>> image(const std::string& key) const {
    if (req_.is_multipart_form_data()) {
      if (!req_.has_file(key)) return std::nullopt;
      const auto& content = req_.get_file_value(key).content;
      return std::vector<std::uint8_t>(content.begin(), content.end());
    }
    const auto v = text(key);
    if (!v) return std::nullopt;
    return base64_decode(*v);
  }

 private:
  const httplib::Request& req_;
  json body_;
};

std::string image_extension(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '5') return ".pgm";
    if (bytes[1] == '6') return ".ppm";
  }
  if (bytes.size() >= 4 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
    return ".png";
  }
  return ".img";
}

IdentifyParams identify_params(const Form& form) {
  IdentifyParams p;
  if (const auto mode = form.text("mode")) p.mode = parse_mode(*mode);
  if (const auto ch = form.text("channels")) p.channels = ChannelSet::parse(*ch);
  if (const auto f = form.text("fusion")) p.fusion = parse_fusion(*f);
  if (const auto q = form.text("quadrant")) p.quadrant = parse_quadrant(*q);
  if (const auto k = form.number("k")) {
    if (*k < 1 || *k != static_cast<double>(static_cast<std::size_t>(*k))) {
      throw Error(Errc::InvalidArgument, "k must be a positive integer");
    }
    p.k = static_cast<std::size_t>(*k);
  }
  if (const auto ev = form.number("ev")) p.ev = *ev;
  if (const auto t = form.number("decision_threshold")) p.decision_threshold = *t;
  return p;
}

}  // namespace

struct Service::Impl {
  Engine& engine;
  std::filesystem::path image_dir;
  httplib::Server server;
  std::mutex name_mutex;
  std::mt19937_64 name_rng{std::random_device{}()};

  Impl(Engine& e, std::filesystem::path dir) : engine(e), image_dir(std::move(dir)) { routes(); }

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    reply(res, status, {{"error_code", code}, {"message", message}});
  }

  template <class Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        fail(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        fail(res, 500, "Internal", e.what());
      }
    };
  }

  std::filesystem::path save_upload(const std::vector<std::uint8_t>& bytes) {
    std::error_code ec;
    std::filesystem::create_directories(image_dir, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + image_dir.string());
    char name[40];
    {
      std::lock_guard lock(name_mutex);
      std::snprintf(name, sizeof name, "%016llx",
                    static_cast<unsigned long long>(name_rng()));
    }
    const auto path = image_dir / (std::string(name) + image_extension(bytes));
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    return path;
  }

  void enroll(const httplib::Request& req, httplib::Response& res) {
    const Form form(req);
    EnrollRequest request;
    request.identity = {form.required_text("name"), form.required_text("national_id"),
                        form.required_text("address")};
    if (const auto ev = form.number("ev")) request.ev = *ev;
    if (!(request.ev >= kEvMin && request.ev <= kEvMax)) {
      throw Error(Errc::EvOutOfRange, "exposure value must lie in [0.51, 0.53]");
    }
    std::vector<std::pair<std::optional<std::vector<std::uint8_t>>, std::optional<EyeImage>*>> eyes{
        {form.image("left"), &request.left}, {form.image("right"), &request.right}};
    for (auto& [bytes, slot] : eyes) {
      if (bytes) *slot = EyeImage{decode_image(*bytes), {}};
    }
    if (!request.left && !request.right) throw Error(Errc::InvalidArgument, "no eye image supplied");

    std::vector<std::filesystem::path> saved;
    std::vector<EnrolledEye> enrolled;
    try {
      for (auto& [bytes, slot] : eyes) {
        if (!bytes) continue;
        saved.push_back(save_upload(*bytes));
        (*slot)->image_ref = saved.back().string();
      }
      enrolled = engine.enroll(request);
    } catch (...) {
      std::error_code ec;
      for (const auto& p : saved) std::filesystem::remove(p, ec);
      throw;
    }
    json ids = json::array(), codes = json::array(), eyes_out = json::array();
    for (const auto& e : enrolled) {
      ids.push_back(e.id.to_string());
      codes.push_back(e.code.to_hex());
      eyes_out.push_back(to_string(e.eye));
    }
    reply(res, 200, {{"record_ids", ids}, {"code_hex", codes}, {"eyes", eyes_out}});
  }

  void identify(const httplib::Request& req, httplib::Response& res) {
    const Form form(req);
    auto bytes = form.image("image");
    if (!bytes) bytes = form.image("probe");
    if (!bytes) throw Error(Errc::InvalidArgument, "missing field 'image'");
    const IdentifyParams params = identify_params(form);
    params.validate();
    const RasterImage probe = decode_image(*bytes);
    reply(res, 200, to_json(engine.identify(probe, params)));
  }

  void rescore(const httplib::Request& req, httplib::Response& res) {
    const Form form(req);
    const std::string token = form.required_text("probe_token");
    const RecordId id = RecordId::parse(form.required_text("record_id"));
    IdentifyParams p = identify_params(form);
    // A channel list without an explicit mode asks for manual scoring.
    if (!form.text("mode") && form.text("channels")) p.mode = MatchMode::Manual;
    if (p.mode == MatchMode::Manual && !form.text("fusion") && p.channels.size() == 1) {
      p.fusion = Fusion::Single;
    }
    p.validate();
    const MatchScore score = engine.rescore(token, id, p.match_params());
    json body = to_json(score);
    body["probe_token"] = token;
    body["record_id"] = id.to_string();
    reply(res, 200, body);
  }

  void record(const httplib::Request& req, httplib::Response& res) {
    const RecordId id = RecordId::parse(req.matches[1].str());
    reply(res, 200, to_json(engine.store().get(id)));
  }

  void health(const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"record_count", engine.store().size()}});
  }

  void routes() {
    server.set_payload_max_length(64u << 20);
    server.Post("/api/enroll", guarded([this](const auto& q, auto& s) { enroll(q, s); }));
    server.Post("/api/identify", guarded([this](const auto& q, auto& s) { identify(q, s); }));
    server.Post("/api/rescore", guarded([this](const auto& q, auto& s) { rescore(q, s); }));
    server.Get(R"(/api/records/([^/]+))", guarded([this](const auto& q, auto& s) { record(q, s); }));
    server.Get("/api/health", guarded([this](const auto& q, auto& s) { health(q, s); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) fail(res, 404, "NotFound", "no such endpoint");
      else if (res.status == 405) fail(res, 405, "MethodNotAllowed", "method not allowed");
      else if (res.status >= 400 && res.status < 500) fail(res, res.status, "InvalidArgument", "bad request");
      else fail(res, 500, "Internal", "internal error");
    });
  }
};

Service::Service(Engine& engine, std::filesystem::path image_dir)
    : impl_(std::make_unique<Impl>(engine, std::move(image_dir))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool Service::is_running() const { return impl_->server.is_running(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace hnir
