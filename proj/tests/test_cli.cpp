#include "belqr/config.hpp"
#include "belqr/io.hpp"
#include "belqr/simulation.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace belqr;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string l;
    while (std::getline(ss, l))
        if (!l.empty()) out.push_back(l);
    return out;
}

std::vector<std::string> cells(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) out.push_back(c);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("belqr_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(BELQR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path m1_csv() {
    const fs::path dir = fs::temp_directory_path() / "belqr_cli_data";
    fs::create_directories(dir);
    const fs::path p = dir / "m1.csv";
    std::ofstream os(p);
    write_dataset_csv(os, generate(ModelId::M1, 150, 77));
    return p;
}

const char* kFitArgs = " --method BEL.s --taus 0.5 --covariates x,z --iters 3000 --burn-in 500 --seed 11";

}  // namespace

TEST(LoadDataset, ToyFile) {
    std::istringstream in("y,x\n1.5,2\n2.5,3\n-1,0.25\n");
    const Dataset d = read_dataset(in, "y", {"x"});
    EXPECT_EQ(d.n(), 3);
    EXPECT_EQ(d.p(), 1);
    EXPECT_DOUBLE_EQ(d.y()(2), -1.0);
    EXPECT_DOUBLE_EQ(d.X()(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.X()(2, 1), 0.25);
}

TEST(LoadDataset, BlankCellNamesRowAndColumn) {
    std::istringstream in("y,x\n1,2\n2,\n");
    try {
        read_dataset(in, "y", {"x"});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;
    }
}

TEST(LoadDataset, ColumnOrderFollowsRequest) {
    std::istringstream in("x1,y,x2\n1,10,100\n2,20,200\n3,30,50\n4,40,70\n");
    const Dataset d = read_dataset(in, "y", {"x2", "x1"});
    EXPECT_DOUBLE_EQ(d.X()(0, 1), 100.0);
    EXPECT_DOUBLE_EQ(d.X()(1, 2), 2.0);
    EXPECT_DOUBLE_EQ(d.y()(1), 20.0);
}

TEST(LoadDataset, Rejections) {
    {
        std::istringstream in("y,x\n1,a\n");
        EXPECT_THROW(read_dataset(in, "y", {"x"}), Error);
    }
    {
        std::istringstream in("y,x\n1,2\n");
        EXPECT_THROW(read_dataset(in, "y", {"w"}), Error);
    }
    {
        std::istringstream in("");
        EXPECT_THROW(read_dataset(in, "y", {"x"}), Error);
    }
    {
        std::istringstream in("y,x\n1,2,3\n");
        EXPECT_THROW(read_dataset(in, "y", {"x"}), Error);
    }
    EXPECT_THROW(load_dataset("/nonexistent/file.csv", "y", {"x"}), Error);
}

TEST(Config, JsonRoundTrip) {
    RunConfig c;
    c.command = "simulate";
    c.seed = 99;
    c.taus = {0.25, 0.75};
    c.methods = {"BEL.s", "BDL"};
    c.prior.kind = "linked_normal";
    c.prior.beta_p0 = {1.0, 0.5};
    c.subsets.push_back({"low", "x", "<", std::nullopt});
    c.subsets.push_back({"two", "z", "==", 2.0});
    const json j = c;
    const RunConfig back = j.get<RunConfig>();
    EXPECT_EQ(json(back), j);
}

TEST(Config, UnknownKeyRejected) {
    json j = RunConfig{};
    j["not_a_key"] = 1;
    EXPECT_THROW(j.get<RunConfig>(), Error);
}

TEST(Cli, FitWritesEstimates) {
    const fs::path out = scratch("fit");
    ASSERT_EQ(cli("fit --data " + m1_csv().string() + kFitArgs + " --out " + out.string()), 0);
    const auto rows = lines(slurp(out / "estimates.csv"));
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], "method,tau,coefficient,estimate,mean,lower,upper");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = cells(rows[r]);
        ASSERT_EQ(f.size(), 7u);
        EXPECT_LT(std::stod(f[5]), std::stod(f[6]));
        EXPECT_GE(std::stod(f[4]), std::stod(f[5]));
        EXPECT_LE(std::stod(f[4]), std::stod(f[6]));
    }
    EXPECT_TRUE(fs::exists(out / "config.json"));
    EXPECT_TRUE(fs::exists(out / "metadata.json"));
    EXPECT_TRUE(fs::exists(out / "diagnostics.json"));
}

TEST(Cli, RqFit) {
    const fs::path out = scratch("rq");
    ASSERT_EQ(cli("fit --data " + m1_csv().string() + " --method RQ --taus 0.25,0.75 --covariates x,z --out " +
                  out.string()),
              0);
    EXPECT_EQ(lines(slurp(out / "estimates.csv")).size(), 7u);
}

TEST(Cli, RerunIsByteIdentical) {
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    const std::string data = m1_csv().string();
    ASSERT_EQ(cli("fit --data " + data + kFitArgs + " --chains --out " + a.string()), 0);
    ASSERT_EQ(cli("fit --data " + data + kFitArgs + " --chains --threads 2 --out " + b.string()), 0);
    for (const char* f : {"estimates.csv", "diagnostics.json", "chain.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, EchoedConfigReproducesRun) {
    const fs::path a = scratch("echo_a"), b = scratch("echo_b");
    ASSERT_EQ(cli("fit --data " + m1_csv().string() + kFitArgs + " --out " + a.string()), 0);
    ASSERT_EQ(cli("--config " + (a / "config.json").string() + " fit --out " + b.string()), 0);
    EXPECT_EQ(slurp(a / "estimates.csv"), slurp(b / "estimates.csv"));
}

TEST(Cli, Asymptotics) {
    const fs::path out = scratch("asy");
    ASSERT_EQ(cli("asymptotics --model M1 --taus 0.25,0.5,0.75 --compare BEL.c RQ --out " + out.string()), 0);
    const auto rows = lines(slurp(out / "asymptotics.csv"));
    ASSERT_EQ(rows.size(), 4u);
    const auto f = cells(rows[2]);
    ASSERT_GE(f.size(), 7u);
    EXPECT_NEAR(std::stod(f[4]), 1.5979, 2e-3);
    EXPECT_NEAR(std::stod(f[5]), 1.3518, 2e-3);
    EXPECT_NEAR(std::stod(f[6]), 1.5979, 2e-3);
}

TEST(Cli, SimulateCoverage) {
    const fs::path out = scratch("sim");
    ASSERT_EQ(cli("simulate coverage --n 100 --reps 2 --iters 2000 --burn-in 400 --methods BEL.s BDL --seed 5 --out " +
                  out.string()),
              0);
    EXPECT_GT(lines(slurp(out / "report.csv")).size(), 1u);
    const json r = json::parse(slurp(out / "report.json"));
    EXPECT_FALSE(r.empty());
    EXPECT_TRUE(fs::exists(out / "report.txt"));
}

TEST(Cli, ErrorsWriteRecordAndExitNonzero) {
    const fs::path out = scratch("err");
    EXPECT_NE(cli("fit --data /nonexistent.csv --covariates x --out " + out.string()), 0);
    const json rec = json::parse(slurp(out / "error.json"));
    EXPECT_EQ(rec.at("module"), "cli");
    EXPECT_NE(rec.at("error").get<std::string>().find("nonexistent"), std::string::npos);

    const fs::path cfg = out / "bad.json";
    std::ofstream(cfg) << R"({"command":"fit","bogus":1})";
    EXPECT_NE(cli("--config " + cfg.string() + " fit --out " + out.string()), 0);
}
