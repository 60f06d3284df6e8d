// Writes the synthetic fixture corpus and a ready-to-run config.ini.

#include <CLI11.hpp>

#include <iostream>

#include "fixture_gen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic bootstrapping fixture"};
  std::string out = "fixture";
  mtaug::fixture::Options o;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", o.seed, "generator seed");
  app.add_option("--transcribed", o.transcribed, "in-domain transcribed utterances");
  app.add_option("--tuning", o.tuning, "tuning utterances");
  app.add_option("--test", o.test, "test utterances");
  app.add_option("--translations", o.translations, "translated utterances");
  app.add_option("--noise", o.noise, "translationese substitution rate");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto p = mtaug::fixture::generate(out, o);
    std::cout << p.config.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
