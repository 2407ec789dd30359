#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "drift/ingest/embedding_file.hpp"
#include "drift/pipeline/stages.hpp"

namespace {

int run_stage(const std::string& stage, const std::string& config, const std::vector<std::string>& sets, unsigned threads,
              const std::string& output) {
  std::vector<std::string> overrides = sets;
  if (threads) overrides.push_back("threads=" + std::to_string(threads));
  if (!output.empty()) overrides.push_back("output_dir=\"" + output + "\"");
  drift::pipeline::RunConfig cfg;
  try {
    cfg = drift::pipeline::load_config(config, overrides);
  } catch (const drift::Error& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    return 2;
  }
  try {
    const auto summary = drift::pipeline::run(cfg, stage);
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
    if (stage == "validate") {
      std::cout << "ok\n";
    } else {
      for (const auto& f : summary.files) std::cout << (cfg.output_dir / f).string() << "\n";
    }
    std::cerr << "provenance " << summary.provenance_hash << "\n";
  } catch (const drift::Error& e) {
    std::cerr << "error [" << (e.stage().empty() ? stage : e.stage()) << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Daily novelty of an embedded corpus and its response to attention exposure"};
  app.set_version_flag("--version", std::string(drift::pipeline::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sets;
  unsigned threads = 0;
  std::string output;
  std::string selected;
  for (const auto& name : drift::pipeline::stage_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("-c,--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override a config key, e.g. --set regression.p=3");
    sub->add_option("-j,--threads", threads, "worker threads");
    sub->add_option("-o,--output", output, "output directory");
    sub->callback([&selected, name] { selected = name; });
  }

  std::string emb, posts;
  std::size_t dim = 0;
  auto* verify = app.add_subcommand("verify-embeddings", "check an embedding file against its posts file");
  verify->add_option("embeddings", emb)->required();
  verify->add_option("posts", posts)->required();
  verify->add_option("--dim", dim, "expected dimension");

  CLI11_PARSE(app, argc, argv);

  if (verify->parsed()) {
    const auto issues = drift::ingest::verify_embedding_file(emb, posts, dim);
    if (issues.empty()) {
      std::cout << "ok\n";
      return 0;
    }
    for (const auto& i : issues) std::cout << i << "\n";
    return 1;
  }
  return run_stage(selected, config, sets, threads, output);
}
