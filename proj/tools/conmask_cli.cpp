#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "conmask/commands.hpp"
#include "conmask/error.hpp"

using namespace conmask;

namespace {

std::pair<std::string, std::string> split_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-world knowledge graph completion with relationship-dependent content masking"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Tokenize raw TSV inputs into a corpus bundle");
  c_pre->add_option("--triples", pre.triples, "head<TAB>relation<TAB>tail file")->required();
  c_pre->add_option("--names", pre.names, "id<TAB>name file")->required();
  c_pre->add_option("--descriptions", pre.descriptions, "entity<TAB>description file")->required();
  c_pre->add_option("--vectors", pre.vectors, "word vectors in text format")->required();
  c_pre->add_option("--out", pre.out, "output directory")->required();
  c_pre->add_option("--min-count", pre.min_count, "drop words seen this many times or fewer");

  SplitArgs sp;
  std::string split_mode = "open";
  auto* c_split = app.add_subcommand("split", "Split a bundle into train / validation / test");
  c_split->add_option("--bundle", sp.bundle)->required();
  c_split->add_option("--out", sp.out)->required();
  c_split->add_option("--mode", split_mode, "open or closed")->capture_default_str();
  c_split->add_option("--keep", sp.spec.entity_keep_fraction, "fraction of entities kept")->capture_default_str();
  c_split->add_option("--holdout", sp.spec.edge_holdout_fraction, "fraction of kept edges held out")
      ->capture_default_str();
  c_split->add_option("--test-share", sp.spec.test_share, "share of the held-out pool used for test")
      ->capture_default_str();
  c_split->add_option("--seed", sp.spec.seed)->capture_default_str();

  TrainArgs tr;
  std::vector<std::string> overrides;
  auto* c_train = app.add_subcommand("train", "Train a model");
  c_train->add_option("--bundle", tr.bundle)->required();
  c_train->add_option("--split", tr.split, "split directory")->required();
  c_train->add_option("--config", tr.config, "key = value config file");
  c_train->add_option("--set", overrides, "config override key=value (repeatable)");
  c_train->add_option("--out", tr.out)->required();

  EvaluateArgs ev;
  std::string scorer = "conmask";
  auto* c_eval = app.add_subcommand("evaluate", "Rank held-out triples");
  c_eval->add_option("--checkpoint", ev.checkpoint, "needed by the conmask scorer");
  c_eval->add_option("--bundle", ev.bundle)->required();
  c_eval->add_option("--split", ev.split)->required();
  c_eval->add_option("--scorer", scorer, "conmask, semavg or random")->capture_default_str();
  c_eval->add_option("--queries", ev.queries, "test, valid or train")->capture_default_str();
  c_eval->add_flag("--filtered", ev.filtered, "filtered protocol (default raw)");
  c_eval->add_option("--seed", ev.seed, "random scorer seed")->capture_default_str();
  c_eval->add_option("--out", ev.out)->required();

  InspectMaskArgs im;
  std::string mask_mode = "mcrw";
  auto* c_mask = app.add_subcommand("inspect-mask", "Per-token mask weights as CSV");
  c_mask->add_option("--bundle", im.bundle)->required();
  c_mask->add_option("--entity", im.entity)->required();
  c_mask->add_option("--relation", im.relation)->required();
  c_mask->add_option("--mode", mask_mode, "mwrw or mcrw")->capture_default_str();
  c_mask->add_option("--window", im.window, "k_m")->capture_default_str();
  c_mask->add_option("--out", im.out, "CSV path (stdout when omitted)");

  SyntheticArgs sy;
  auto* c_syn = app.add_subcommand("make-synthetic", "Write the synthetic indicator-word graph");
  c_syn->add_option("--out", sy.out)->required();
  c_syn->add_option("--persons", sy.options.persons)->capture_default_str();
  c_syn->add_option("--things", sy.options.things)->capture_default_str();
  c_syn->add_option("--relations", sy.options.relations)->capture_default_str();
  c_syn->add_option("--dim", sy.options.dim)->capture_default_str();
  c_syn->add_option("--seed", sy.options.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_pre) {
      cmd_preprocess(pre);
    } else if (*c_split) {
      sp.spec.mode = parse_split_mode(split_mode);
      const Split s = cmd_split(sp);
      std::cout << "train " << s.counts.train << " validation " << s.counts.validation << " test "
                << s.counts.test << " (both endpoints unseen " << s.counts.both_unseen << ")" << '\n';
    } else if (*c_train) {
      for (const auto& kv : overrides) tr.overrides.push_back(split_override(kv));
      cmd_train(tr);
    } else if (*c_eval) {
      ev.scorer = parse_scorer(scorer);
      std::cout << cmd_evaluate(ev).to_json() << '\n';
    } else if (*c_mask) {
      im.mode = parse_mask_mode(mask_mode);
      const std::string csv = cmd_inspect_mask(im);
      if (im.out.empty()) std::cout << csv;
    } else if (*c_syn) {
      cmd_make_synthetic(sy);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
