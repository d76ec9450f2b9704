// Desk-scale M4 Yearly check. Needs the competition files:
//   M4_YEARLY_TRAIN=.../Yearly-train.csv M4_YEARLY_TEST=.../Yearly-test.csv
// Exits 77 (skipped) when they are not available.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sbof/pipeline.hpp"

using namespace sbof;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;
constexpr std::size_t kSubset = 1000;

// Data lines keyed by id, in file order; the quoted header row is dropped.
std::vector<std::pair<std::string, std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string id = line.substr(0, line.find(','));
    id.erase(std::remove(id.begin(), id.end(), '"'), id.end());
    if (id.empty() || id == "V1") continue;
    rows.emplace_back(id, line);
  }
  return rows;
}

}  // namespace

int main() {
  const char* train_env = std::getenv("M4_YEARLY_TRAIN");
  const char* test_env = std::getenv("M4_YEARLY_TEST");
  if (!train_env || !test_env || !fs::exists(train_env) || !fs::exists(test_env)) {
    std::cout << "SKIP 10 M4 yearly subset: M4_YEARLY_TRAIN / M4_YEARLY_TEST not set or missing" << std::endl;
    return kSkip;
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto train = read_rows(train_env);
    const auto test = read_rows(test_env);
    std::map<std::string, std::string> test_by_id(test.begin(), test.end());

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(2018);
    for (std::size_t i = 0; i < std::min(kSubset, order.size()); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(std::min(kSubset, order.size()));
    std::sort(order.begin(), order.end());

    const fs::path dir = fs::temp_directory_path() / "sbof_acceptance_m4";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
      std::ofstream tr(dir / "train.csv"), te(dir / "test.csv"), meta(dir / "meta.csv");
      meta << "id,period,horizon,group\n";
      for (std::size_t i : order) {
        const auto& [id, line] = train[i];
        tr << line << '\n';
        te << test_by_id.at(id) << '\n';
        meta << id << ",1,6,Yearly\n";
      }
    }

    RunConfig cfg;
    cfg.corpus = (dir / "train.csv").string();
    cfg.test = (dir / "test.csv").string();
    cfg.metadata = (dir / "meta.csv").string();
    cfg.work_dir = (dir / "work").string();
    cmd_featurize(cfg);
    cmd_forecast(cfg);
    cmd_train(cfg);
    const auto eval = cmd_evaluate(cfg);

    const auto& total = eval.at("total");
    const double combined = total.at(kCombinationId).at("owa").get<double>();
    double worst = 0.0;
    std::string worst_id;
    for (const auto& id : cfg.methods) {
      const double owa = total.at(id).at("owa").get<double>();
      if (owa > worst) worst = owa, worst_id = id;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = combined < 1.0 && combined <= worst;
    std::cout << (pass ? "PASS" : "FAIL") << " 10 M4 yearly subset: combination OWA " << combined
              << ", worst member " << worst_id << " " << worst << ", " << order.size() << " series, " << secs
              << " s" << std::endl;
    return pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cout << "FAIL 10 M4 yearly subset: " << e.what() << std::endl;
    return 1;
  }
}
