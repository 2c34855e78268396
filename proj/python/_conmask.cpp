#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "conmask/commands.hpp"
#include "conmask/error.hpp"
#include "conmask/hashing.hpp"
#include "conmask/masking.hpp"
#include "conmask/tokenizer.hpp"

namespace py = pybind11;
using namespace conmask;

namespace {

using Rows = std::vector<std::vector<double>>;

nk::Tensor to_tensor(const Rows& rows) {
  if (rows.empty()) throw ShapeError("matrix has no rows");
  nk::Tensor t({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ShapeError("ragged matrix");
    std::copy(rows[i].begin(), rows[i].end(), t.row_span(i).begin());
  }
  return t;
}

Rows to_rows(const nk::Tensor& t) {
  Rows out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) out[i].assign(t.row_span(i).begin(), t.row_span(i).end());
  return out;
}

py::object report_dict(const RankingReport& r) {
  return py::module_::import("json").attr("loads")(r.to_json());
}

}  // namespace

PYBIND11_MODULE(_conmask, m) {
  m.doc() = "Bindings for the conmask C++ library";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("is_stop_word", &is_stop_word, py::arg("token"));
  m.def("git_blob_sha1", [](const py::bytes& b) { return git_blob_sha1(std::string(b)); }, py::arg("content"));

  m.def("mwrw_weights", [](const Rows& desc, const Rows& rel) { return mwrw_weights(to_tensor(desc), to_tensor(rel)); },
        py::arg("description"), py::arg("relation"));
  m.def("mcrw_weights", [](const std::vector<double>& w, std::size_t k) { return mcrw_weights(w, k); },
        py::arg("mwrw"), py::arg("window") = 6);
  m.def(
      "apply_mask",
      [](const Rows& desc, const Rows& rel, std::size_t window, const std::string& mode) {
        const auto mc = apply_mask(to_tensor(desc), to_tensor(rel), {window, parse_mask_mode(mode)});
        py::dict d;
        d["mwrw"] = mc.mwrw;
        d["mcrw"] = mc.mcrw;
        d["masked"] = to_rows(mc.masked);
        return d;
      },
      py::arg("description"), py::arg("relation"), py::arg("window") = 6, py::arg("mode") = "mcrw");

  m.def(
      "make_synthetic",
      [](const std::filesystem::path& out, std::uint64_t seed, std::size_t persons, std::size_t things,
         std::size_t relations, std::size_t dim) {
        SyntheticArgs a;
        a.out = out;
        a.options.seed = seed;
        a.options.persons = persons;
        a.options.things = things;
        a.options.relations = relations;
        a.options.dim = dim;
        cmd_make_synthetic(a);
      },
      py::arg("out"), py::arg("seed") = 1, py::arg("persons") = 25, py::arg("things") = 25,
      py::arg("relations") = 5, py::arg("dim") = 32);
  m.def(
      "preprocess",
      [](const std::filesystem::path& triples, const std::filesystem::path& names,
         const std::filesystem::path& descriptions, const std::filesystem::path& vectors,
         const std::filesystem::path& out, std::size_t min_count) {
        cmd_preprocess({triples, names, descriptions, vectors, out, min_count});
      },
      py::arg("triples"), py::arg("names"), py::arg("descriptions"), py::arg("vectors"), py::arg("out"),
      py::arg("min_count") = 0);
  m.def(
      "split",
      [](const std::filesystem::path& bundle, const std::filesystem::path& out, const std::string& mode, double keep,
         double holdout, double test_share, std::uint64_t seed) {
        SplitArgs a;
        a.bundle = bundle;
        a.out = out;
        a.spec = {keep, holdout, test_share, seed, parse_split_mode(mode)};
        const Split s = cmd_split(a);
        return py::module_::import("json").attr("loads")(s.manifest_json());
      },
      py::arg("bundle"), py::arg("out"), py::arg("mode") = "open", py::arg("keep") = 0.9, py::arg("holdout") = 0.1,
      py::arg("test_share") = 0.5, py::arg("seed") = 0);
  m.def(
      "train",
      [](const std::filesystem::path& bundle, const std::filesystem::path& split, const std::filesystem::path& out,
         // optional, since an empty path default round-trips through pathlib as "."
         const std::optional<std::filesystem::path>& config, const std::map<std::string, std::string>& overrides) {
        TrainArgs a{bundle, split, config.value_or(std::filesystem::path()), out, {overrides.begin(), overrides.end()}};
        py::gil_scoped_release release;
        cmd_train(a);
      },
      py::arg("bundle"), py::arg("split"), py::arg("out"), py::arg("config") = py::none(),
      py::arg("overrides") = std::map<std::string, std::string>{});
  m.def(
      "evaluate",
      [](const std::filesystem::path& bundle, const std::filesystem::path& split, const std::filesystem::path& out,
         const std::string& scorer, const std::optional<std::filesystem::path>& checkpoint, const std::string& queries,
         bool filtered, std::uint64_t seed) {
        EvaluateArgs a;
        a.bundle = bundle;
        a.split = split;
        a.out = out;
        a.scorer = parse_scorer(scorer);
        a.checkpoint = checkpoint.value_or(std::filesystem::path());
        a.queries = queries;
        a.filtered = filtered;
        a.seed = seed;
        return report_dict(cmd_evaluate(a));
      },
      py::arg("bundle"), py::arg("split"), py::arg("out"), py::arg("scorer") = "conmask",
      py::arg("checkpoint") = py::none(), py::arg("queries") = "test", py::arg("filtered") = false,
      py::arg("seed") = 0);
  m.def(
      "inspect_mask",
      [](const std::filesystem::path& bundle, const std::string& entity, const std::string& relation,
         const std::string& mode, std::size_t window) {
        InspectMaskArgs a;
        a.bundle = bundle;
        a.entity = entity;
        a.relation = relation;
        a.mode = parse_mask_mode(mode);
        a.window = window;
        return cmd_inspect_mask(a);
      },
      py::arg("bundle"), py::arg("entity"), py::arg("relation"), py::arg("mode") = "mcrw", py::arg("window") = 6);
}
