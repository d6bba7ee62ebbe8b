#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "posestar/errors.hpp"
#include "posestar/pipeline.hpp"
#include "posestar/synthgen.hpp"

namespace py = pybind11;
using namespace posestar;

namespace {

py::array_t<std::uint8_t> mask_array(const BinaryMask& m) {
  py::array_t<std::uint8_t> out({m.height(), m.width()});
  std::copy(m.storage().begin(), m.storage().end(), out.mutable_data());
  return out;
}

BinaryMask mask_from(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw ShapeError("mask must be 2-D");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  BinaryMask m(h, w, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.data()[i] != 0;
  return m;
}

py::dict token_group_dict(const TokenGroup& g) {
  py::dict d;
  d["star"] = g.star_tokens;
  d["fleshy"] = g.fleshy_tokens;
  d["clothes"] = g.clothes_tokens;
  d["start_anchor"] = g.start_anchor;
  d["end_anchor"] = g.end_anchor;
  d["include_arms"] = g.include_arms;
  d["include_legs"] = g.include_legs;
  return d;
}

PipelineConfig config_from(const py::dict& overrides) {
  auto text = py::module_::import("json").attr("dumps")(overrides).cast<std::string>();
  return config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_posestar, m) {
  m.doc() = "Anatomy-aware human mask synthesis from diffusion attention";

  auto base = py::register_exception<Error>(m, "PosestarError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<ParamError>(m, "ParamError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<EmptyRegionError>(m, "EmptyRegionError", base.ptr());
  py::register_exception<NoTokensError>(m, "NoTokensError", base.ptr());

  m.def("parse_instruction", [](const std::string& text) {
    Instruction in = parse_instruction(text);
    py::dict d;
    d["garment_class"] = std::string(to_string(in.garment_class));
    d["garment_noun"] = in.garment_noun;
    d["length_anchor"] = in.length_anchor;
    d["start_anchor"] = in.start_anchor;
    d["tokens"] = token_group_dict(expand_to_token_group(in));
    return d;
  }, py::arg("instruction"));

  m.def("read_astd", [](const std::filesystem::path& path) {
    AttentionStack s = read_attention_stack(path);
    py::array_t<float> arr({s.steps, s.tokens, s.height, s.width});
    std::copy(s.data.begin(), s.data.end(), arr.mutable_data());
    std::vector<std::string> kinds;
    for (auto k : s.token_kinds) kinds.emplace_back(to_string(k));
    return py::make_tuple(arr, s.token_names, kinds);
  }, py::arg("path"), "Returns (array[T, N, H, W], token names, token kinds).");

  m.def("write_astd", [](const std::filesystem::path& path,
                         py::array_t<float, py::array::c_style | py::array::forcecast> arr,
                         const std::vector<std::string>& names, const std::vector<std::string>& kinds) {
    if (arr.ndim() != 4) throw ShapeError("attention array must be 4-D [T, N, H, W]");
    AttentionStack s;
    s.steps = static_cast<int>(arr.shape(0));
    s.tokens = static_cast<int>(arr.shape(1));
    s.height = static_cast<int>(arr.shape(2));
    s.width = static_cast<int>(arr.shape(3));
    s.data.assign(arr.data(), arr.data() + arr.size());
    s.token_names = names;
    for (const auto& k : kinds) s.token_kinds.push_back(token_kind_from_string(k));
    write_attention_stack(s, path);
  }, py::arg("path"), py::arg("array"), py::arg("token_names"), py::arg("token_kinds"));

  m.def("synth", [](const std::filesystem::path& out_dir, const std::string& pose, std::uint64_t seed,
                    const std::string& instruction, bool zero_jitter) {
    auto scene = synth::generate_scene(synth::pose_preset_from_string(pose), seed, instruction);
    auto profile = zero_jitter ? synth::PhaseProfile::zero_jitter() : synth::PhaseProfile{};
    profile.seed = seed;
    synth::write_fixture(out_dir, scene, synth::generate_attention(scene, profile));
  }, py::arg("out_dir"), py::arg("pose") = "standing", py::arg("seed") = 0,
     py::arg("instruction") = "belly-length blouse", py::arg("zero_jitter") = false);

  m.def("run_fixture", [](const std::filesystem::path& dir, const py::dict& config) {
    PipelineConfig cfg = config_from(config);
    Fixture fx = load_fixture(dir);
    py::list results;
    for (const auto& c : fx.cases) {
      PipelineInputs in = fx.inputs;
      in.instruction = c.instruction;
      RunResult r;
      {
        py::gil_scoped_release release;
        r = run(in, cfg);
      }
      r.report.iou = iou(r.mask, c.ground_truth);
      auto report = py::module_::import("json").attr("loads")(r.report.to_json().dump());
      results.append(py::make_tuple(c.instruction, mask_array(r.mask), report));
    }
    return results;
  }, py::arg("fixture_dir"), py::arg("config") = py::dict(),
     "Runs every case of a fixture; returns a list of (instruction, mask, report).");

  m.def("iou", [](py::array_t<std::uint8_t> a, py::array_t<std::uint8_t> b) {
    return iou(mask_from(a), mask_from(b));
  }, py::arg("a"), py::arg("b"));
}
