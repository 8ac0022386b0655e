// Writes the synthetic two-domain fixture store and its manifest.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "owr.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic two-domain embedding store"};
  owr::synthetic::DomainsConfig cfg;
  std::string out_store, out_manifest, layout = "two-domains";
  app.add_option("-o,--output", out_store, "Store path (.emb or .csv)")->required();
  app.add_option("--manifest", out_manifest, "Also write the matching manifest here");
  app.add_option("--layout", layout, "two-domains or xor")->check(CLI::IsMember({"two-domains", "xor"}));
  app.add_option("--dims", cfg.dims);
  app.add_option("--classes", cfg.classes_per_domain);
  app.add_option("--samples", cfg.samples_per_class);
  app.add_option("--domain-sigma", cfg.domain_sigma);
  app.add_option("--class-sigma", cfg.class_sigma);
  app.add_option("--separation", cfg.separation);
  app.add_option("--seed", cfg.seed);
  CLI11_PARSE(app, argc, argv);
  cfg.layout = layout == "xor" ? owr::synthetic::Layout::xor_lobes : owr::synthetic::Layout::two_domains;

  try {
    const auto store = owr::synthetic::make_domains(cfg);
    owr::save_store(store, out_store);
    if (!out_manifest.empty()) {
      auto m = owr::synthetic::domains_manifest();
      m.seed = cfg.seed;
      owr::detail::write_file(out_manifest, owr::to_json(m).dump(2) + "\n");
    }
    std::cout << "wrote " << store.n_rows() << " rows x " << store.n_dims() << " dims to " << out_store << "\n";
  } catch (const owr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
