// Generates the two-cluster synthetic market used in the README quickstart:
// a target market t1 and a smaller source market s1 over the same catalog.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "crossgr/synthetic.hpp"

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write synthetic two-cluster interaction files"};
  std::string out_dir = "data";
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    crossgr::BlockDatasetSpec spec;
    spec.seed = seed;
    crossgr::write_interactions_tsv(out_dir + "/t1.tsv",
                                    crossgr::make_block_interactions(spec));
    crossgr::write_interactions_tsv(
        out_dir + "/s1.tsv",
        crossgr::make_block_source_market(spec, "s1", 60, seed + 1));
    std::cout << "wrote " << out_dir << "/t1.tsv and " << out_dir << "/s1.tsv\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
