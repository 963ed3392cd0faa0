// Writes the bundled synthetic asthma/lead sample.
//   make_asthma_sample [output.csv] [n] [seed]

#include <iostream>
#include <sstream>
#include <string>

#include "rbc/io.hpp"

int main(int argc, char** argv)
{
    const std::string path = argc > 1 ? argv[1] : "data/asthma_synthetic.csv";
    const int n = argc > 2 ? std::stoi(argv[2]) : 1200;
    const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 20111012;
    const auto table = rbc::synthetic_asthma_sample(n, seed);
    std::ostringstream os;
    rbc::write_csv_row(os, table.header);
    for (const auto& row : table.rows) rbc::write_csv_row(os, row);
    rbc::write_text_file(path, os.str());
    std::cout << path << '\n';
    return 0;
}
