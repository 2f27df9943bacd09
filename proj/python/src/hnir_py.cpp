#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "hnir/engine.hpp"
#include "hnir/error.hpp"
#include "hnir/service.hpp"
#include "hnir/synthgen.hpp"

namespace py = pybind11;
using namespace hnir;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

// HxW gray, HxWx3 RGB or HxWx4 RGB+NIR.
RasterImage from_array(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(Errc::InvalidArgument, "image array must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  if (c != 1 && c != 3 && c != 4) throw Error(Errc::InvalidArgument, "image needs 1, 3 or 4 channels");
  std::vector<Plane> planes(static_cast<std::size_t>(c), Plane(w, h));
  const std::uint8_t* src = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) planes[static_cast<std::size_t>(k)].at(x, y) = *src++;
  return RasterImage(std::move(planes));
}

U8Array to_array(const RasterImage& img) {
  const auto c = static_cast<py::ssize_t>(img.plane_count());
  U8Array out({static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width()), c});
  auto* dst = out.mutable_data();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (py::ssize_t k = 0; k < c; ++k) *dst++ = img.plane(static_cast<std::size_t>(k)).at(x, y);
  return out;
}

// Accepts a path, raw encoded bytes or a uint8 array.
RasterImage image_arg(const py::object& obj) {
  if (py::isinstance<py::bytes>(obj)) {
    const std::string s = obj.cast<std::string>();
    return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  if (py::isinstance<py::str>(obj) || py::hasattr(obj, "__fspath__")) {
    return load_image(obj.cast<std::filesystem::path>());
  }
  return from_array(obj.cast<U8Array>());
}

IdentifyParams identify_params(const std::string& mode, const std::optional<std::string>& channels,
                               const std::optional<std::string>& fusion, const std::string& quadrant,
                               std::size_t k, double ev) {
  IdentifyParams p;
  p.mode = parse_mode(mode);
  if (channels) p.channels = ChannelSet::parse(*channels);
  if (fusion) {
    p.fusion = parse_fusion(*fusion);
  } else if (p.mode == MatchMode::Manual && p.channels.size() == 1) {
    p.fusion = Fusion::Single;
  }
  p.quadrant = parse_quadrant(quadrant);
  p.k = k;
  p.ev = ev;
  return p;
}

class PyEngine {
 public:
  explicit PyEngine(const std::filesystem::path& dir, bool create)
      : store_(std::make_unique<IndexStore>(IndexStore::open(dir, create))), engine_(*store_) {}

  py::dict enroll(const std::string& name, const std::string& national_id, const std::string& address,
                  const py::object& left, const py::object& right, double ev) {
    EnrollRequest req;
    req.identity = {name, national_id, address};
    req.ev = ev;
    const auto ref = [](const py::object& o) {
      return py::isinstance<py::str>(o) || py::hasattr(o, "__fspath__") ? o.cast<std::filesystem::path>().string()
                                                                         : std::string{};
    };
    if (!left.is_none()) req.left = EyeImage{image_arg(left), ref(left)};
    if (!right.is_none()) req.right = EyeImage{image_arg(right), ref(right)};
    py::list ids, codes, eyes;
    for (const auto& e : engine_.enroll(req)) {
      ids.append(e.id.to_string());
      codes.append(e.code.to_hex());
      eyes.append(std::string(to_string(e.eye)));
    }
    py::dict out;
    out["record_ids"] = ids;
    out["code_hex"] = codes;
    out["eyes"] = eyes;
    return out;
  }

  py::object identify(const py::object& image, const std::string& mode, const std::optional<std::string>& channels,
                      const std::optional<std::string>& fusion, const std::string& quadrant, std::size_t k,
                      double ev) {
    const IdentifyParams p = identify_params(mode, channels, fusion, quadrant, k, ev);
    const RasterImage img = image_arg(image);
    IdentifyResult r;
    {
      py::gil_scoped_release release;
      r = engine_.identify(img, p);
    }
    return to_py(to_json(r));
  }

  py::object rescore(const std::string& token, const std::string& record_id, const std::string& mode,
                     const std::optional<std::string>& channels, const std::optional<std::string>& fusion,
                     const std::string& quadrant) {
    const std::string effective_mode = channels && mode == "AUTO" ? "MANUAL" : mode;
    const MatchParams p = identify_params(effective_mode, channels, fusion, quadrant, 1, kDefaultEv).match_params();
    return to_py(to_json(engine_.rescore(token, RecordId::parse(record_id), p)));
  }

  py::object record(const std::string& record_id) const {
    return to_py(to_json(store_->get(RecordId::parse(record_id))));
  }

  std::vector<std::string> scan() const {
    std::vector<std::string> out;
    for (const auto& id : store_->scan()) out.push_back(id.to_string());
    return out;
  }

  std::vector<std::pair<std::string, int>> candidates(const std::string& code_hex, std::size_t k) const {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& c : store_->candidates(HnirCode::from_hex(code_hex), k)) out.emplace_back(c.id.to_string(), c.distance);
    return out;
  }

  std::size_t size() const { return store_->size(); }

 private:
  std::unique_ptr<IndexStore> store_;
  Engine engine_;
};

}  // namespace

PYBIND11_MODULE(_hnir, m) {
  m.doc() = "HNIR iris indexing and matching";

  static py::exception<Error> hnir_error(m, "HnirError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string code(to_string(e.code()));
      py::object err = py::reinterpret_borrow<py::object>(hnir_error.ptr())(code + ": " + e.what());
      err.attr("code") = code;
      PyErr_SetObject(hnir_error.ptr(), err.ptr());
    }
  });

  m.def("load_image", [](const py::object& src) { return to_array(image_arg(src)); }, py::arg("source"),
        "Decode a path or encoded bytes into an HxWxC uint8 array.");
  m.def("encode_pnm", [](const U8Array& a) {
    const auto bytes = encode_pnm(from_array(a));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def(
      "process",
      [](const py::object& image, double ev) {
        EngineConfig cfg;
        cfg.ev = ev;
        const ProcessedImage p = process_image(image_arg(image), cfg);
        py::dict out;
        out["code_hex"] = p.code.to_hex();
        const auto& g = p.geometry;
        out["geometry"] = py::dict(py::arg("x0") = g.x0, py::arg("y0") = g.y0, py::arg("r_pupil") = g.r_pupil,
                                   py::arg("r_iris") = g.r_iris, py::arg("d_h") = g.d_h, py::arg("d_v") = g.d_v);
        out["normalized"] = to_array(p.normalized);
        return out;
      },
      py::arg("image"), py::arg("ev") = kDefaultEv, "Locate, normalize and encode one eye image.");
  m.def(
      "generate_code", [](const py::object& crop) { return generate_code(image_arg(crop)).to_hex(); },
      py::arg("crop"), "HNIR code of an already normalized 335x235 crop, as 16 hex digits.");
  m.def(
      "code_distance",
      [](const std::string& a, const std::string& b) { return code_distance(HnirCode::from_hex(a), HnirCode::from_hex(b)); },
      py::arg("a"), py::arg("b"));

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<const std::filesystem::path&, bool>(), py::arg("store_dir"), py::arg("create") = true)
      .def("enroll", &PyEngine::enroll, py::arg("name"), py::arg("national_id"), py::arg("address"),
           py::arg("left") = py::none(), py::arg("right") = py::none(), py::arg("ev") = kDefaultEv)
      .def("identify", &PyEngine::identify, py::arg("image"), py::arg("mode") = "AUTO",
           py::arg("channels") = py::none(), py::arg("fusion") = py::none(), py::arg("quadrant") = "WHOLE",
           py::arg("k") = kDefaultCandidates, py::arg("ev") = kDefaultEv)
      .def("rescore", &PyEngine::rescore, py::arg("probe_token"), py::arg("record_id"), py::arg("mode") = "AUTO",
           py::arg("channels") = py::none(), py::arg("fusion") = py::none(), py::arg("quadrant") = "WHOLE")
      .def("record", &PyEngine::record, py::arg("record_id"))
      .def("scan", &PyEngine::scan)
      .def("candidates", &PyEngine::candidates, py::arg("code_hex"), py::arg("k") = kDefaultCandidates)
      .def("__len__", &PyEngine::size);

  m.def(
      "bench",
      [](int n, int probes, std::size_t k, double noise, std::uint64_t seed, int runs) {
        BenchOptions o;
        o.gallery_size = n;
        o.probes = probes;
        o.k = k;
        o.noise_sigma = noise;
        o.seed = seed;
        o.runs = runs;
        BenchReport r;
        {
          py::gil_scoped_release release;
          r = bench(o);
        }
        py::dict out;
        out["gallery_size"] = r.gallery_size;
        out["probes"] = r.probes;
        out["k"] = r.k;
        out["runs"] = r.runs;
        out["exhaustive_comparisons"] = r.exhaustive_comparisons;
        out["indexed_comparisons"] = r.indexed_comparisons;
        out["exhaustive_wall_time"] = r.exhaustive_wall_time;
        out["indexed_wall_time"] = r.indexed_wall_time;
        out["comparison_reduction_fraction"] = r.comparison_reduction_fraction;
        out["time_ratio"] = r.time_ratio;
        out["recall_at_k"] = r.recall_at_k;
        out["exhaustive_rank1"] = r.exhaustive_rank1;
        out["indexed_rank1"] = r.indexed_rank1;
        return out;
      },
      py::arg("n") = 1000, py::arg("probes") = 100, py::arg("k") = kDefaultCandidates, py::arg("noise") = 8.0,
      py::arg("seed") = 42, py::arg("runs") = 5);

  m.def(
      "generate_gallery",
      [](int n, const std::filesystem::path& out, std::uint64_t seed, double noise) {
        synth::write_gallery(out, synth::generate_gallery(n, seed, noise));
      },
      py::arg("n"), py::arg("out"), py::arg("seed") = 42, py::arg("noise") = 8.0,
      "Write <label>_enroll.ppm, <label>_probe.ppm and manifest.txt under `out`.");
}
