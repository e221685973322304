// emf_calibrate: measures the rigidity and local-law envelope constants on GOE
// calibration seeds and writes them as JSON (the frozen golden file).

#include <iostream>

#include "CLI11.hpp"
#include "emf/calibration.hpp"
#include "emf/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Calibrate envelope constants"};
  std::string out = "envelopes.json";
  std::size_t seeds = 50;
  double safety = 1.25;
  emf::EnvelopeProtocol protocol;
  app.add_option("--out", out, "Output JSON path");
  app.add_option("--seeds", seeds, "Number of calibration seeds");
  app.add_option("--safety", safety, "Multiplier on the largest observed ratio");
  app.add_option("--n", protocol.n, "Matrix dimension");
  CLI11_PARSE(app, argc, argv);

  const auto c = emf::calibrate_envelopes(protocol, seeds, safety);
  emf::io::write_json(out, c.to_json());
  std::cout << c.to_json().dump(2) << "\n";
  return 0;
}
