#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "graphdiff/commands.hpp"
#include "graphdiff/config.hpp"
#include "graphdiff/error.hpp"
#include "graphdiff/evalsuite.hpp"
#include "graphdiff/fingerprint.hpp"
#include "graphdiff/smiles.hpp"

namespace py = pybind11;
using namespace graphdiff;

namespace {

const AtomVocab &std_vocab() {
  static const AtomVocab v = AtomVocab::standard();
  return v;
}

py::dict to_dict(const nlohmann::json &j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph diffusion for multi-conditional molecule generation";
  m.attr("__version__") = kToolVersion;

  // translators run newest first, so the generic one goes in before SyntaxError
  py::register_exception<Error>(m, "GraphdiffError", PyExc_RuntimeError);
  static py::exception<SyntaxError> syntax_error(m, "SmilesSyntaxError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SyntaxError &e) {
      PyErr_SetObject(syntax_error.ptr(), py::make_tuple(e.what(), e.position()).ptr());
    }
  });

  m.def(
      "canonical_smiles",
      [](const std::string &s) { return write_smiles(parse_smiles(s, std_vocab()), std_vocab()); },
      py::arg("smiles"), "Parse and write back in canonical form.");
  m.def(
      "is_valid", [](const std::string &s) { return is_valid(parse_smiles(s, std_vocab()), std_vocab()); },
      py::arg("smiles"));
  m.def(
      "atom_count", [](const std::string &s) { return parse_smiles(s, std_vocab()).num_atoms(); },
      py::arg("smiles"));
  m.def(
      "ring_count", [](const std::string &s) { return ring_count(parse_smiles(s, std_vocab())); },
      py::arg("smiles"));
  m.def(
      "tanimoto",
      [](const std::string &a, const std::string &b) {
        const auto &v = std_vocab();
        return tanimoto(fingerprint(parse_smiles(a, v), v), fingerprint(parse_smiles(b, v), v));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "descriptors",
      [](const std::string &s) {
        auto d = descriptors(parse_smiles(s, std_vocab()), std_vocab());
        return std::vector<double>(d.begin(), d.end());
      },
      py::arg("smiles"));

  m.def("guidance_combine", &guidance_combine, py::arg("logp_uncond"), py::arg("logp_cond"), py::arg("s_guide"),
        "Combine log-probabilities with guidance scale s; returns normalized log-probabilities.");
  m.def(
      "cosine_schedule", [](int T, double s) { return cosine_schedule(T, s).abar; }, py::arg("T"),
      py::arg("s_offset") = 0.008, "Cumulative abar[0..T].");

  m.def(
      "toy_dataset",
      [](int n, int max_atoms, std::uint64_t seed) {
        ToySpec ts;
        ts.n_molecules = n;
        ts.max_atoms = max_atoms;
        ts.seed = seed;
        return to_dict(dataset_to_json(gen_toy_dataset(ts)));
      },
      py::arg("n") = 500, py::arg("max_atoms") = 12, py::arg("seed") = 0);

  m.def(
      "sample",
      [](const std::string &checkpoint, int count, double s_guide, std::uint64_t seed, int threads) {
        Model model = load_model(checkpoint);
        std::vector<ConditionSet> conds(count, ConditionSet::null(model.specs().size()));
        SampleConfig sc;
        sc.s_guide = s_guide;
        sc.seed = seed;
        sc.threads = threads;
        std::vector<SampleResult> out;
        {
          py::gil_scoped_release release;
          out = sample_many(model, conds, sc);
        }
        std::vector<std::string> smiles;
        for (const auto &r : out) smiles.push_back(write_smiles(r.graph, model.vocab));
        return smiles;
      },
      py::arg("checkpoint"), py::arg("count") = 10, py::arg("s_guide") = 0.0, py::arg("seed") = 0,
      py::arg("threads") = 1, "Unconditional samples from a checkpoint manifest.");

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the graphdiff tool in-process; returns (exit_code, stdout, stderr).");
}
