#include <gtest/gtest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <sstream>

#include "snscl/cli/commands.hpp"
#include "snscl/cli/config.hpp"

using namespace snscl;
using namespace snscl::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int rows = -1;   // header
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') ++rows;
    }
    return rows;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("snscl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        config = dir / "exp.ini";
        std::ofstream(config) << "# quick experiment\n"
                                 "[run]\nlabel = quick\nout = " << (dir / "out").string() << "\n"
                                 "[data]\nseed = 3\ntrain_per_class = 20\ntest_per_class = 10\n"
                                 "[train]\nepochs = 2\nwarmup_epochs = 1\n"
                                 "[network]\nfourier_features = 16\nbackbone_hidden = 16,16\n";
        opts.config = config;
    }
    int gen() { return cmd_gen(opts, log, err); }
    int train() { return cmd_train(opts, log, err); }

    fs::path dir, config;
    CommandOptions opts;
    std::ostringstream log, err;
};

}  // namespace

TEST(Ini, SectionsCommentsAndErrors) {
    const auto doc = parse_ini("; c\n[a]\nx = 1\n  y=two words \n[b]\n# c\nz=\n");
    EXPECT_EQ(doc.sections.at("a").at("y").value, "two words");
    EXPECT_EQ(doc.sections.at("b").at("z").value, "");
    EXPECT_THROW(parse_ini("x = 1\n"), ConfigError);
    EXPECT_THROW(parse_ini("[a]\nx = 1\nx = 2\n"), ConfigError);
    EXPECT_THROW(parse_ini("[a\n"), ConfigError);
    EXPECT_THROW(parse_ini("[a]\njust words\n"), ConfigError);
}

TEST(Config, DefaultsResolveAndValidate) {
    const ExperimentConfig c = parse_config("");
    EXPECT_EQ(c.training.queue_size, 32u);
    EXPECT_EQ(c.training.threshold, 0.5);
    EXPECT_EQ(c.training.temperature, 0.07);
    EXPECT_EQ(c.training.alpha, 0.99);
    EXPECT_EQ(c.training.lambda_ntcl, 1.0);
    EXPECT_EQ(c.training.lambda_kl, 0.001);
    EXPECT_EQ(c.training.batch_size, 32u);
    EXPECT_EQ(c.noise_rate, 0.4);
}

TEST(Config, UnknownKeysAndSectionsAreRejected) {
    EXPECT_THROW(parse_config("[train]\nlearning_rate = 0.1\n"), ConfigError);
    EXPECT_THROW(parse_config("[optimizer]\nlr = 0.1\n"), ConfigError);
    EXPECT_THROW(parse_config("[train]\nlr = fast\n"), ConfigError);
    EXPECT_THROW(parse_config("[train]\nlr = -1\n"), ConfigError);
    EXPECT_THROW(parse_config("[snscl]\nablation = no-magic\n"), ConfigError);
    EXPECT_THROW(parse_config("[data]\nsuper_groups = 3\n"), ConfigError);
    try {
        parse_config("[train]\n\nbogus = 1\n", "exp.ini");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("exp.ini:3"), std::string::npos);
    }
}

TEST(Config, CanonicalTextRoundTrips) {
    ExperimentConfig c = parse_config("[train]\nlnl = gce\nlr_milestones = 10,30\n[snscl]\nablation = no-stoch,plain_scl\n");
    EXPECT_EQ(c.training.lnl.kind, train::LossKind::gce);
    EXPECT_FALSE(c.training.ablation.stochastic_module);
    EXPECT_TRUE(c.training.ablation.plain_scl);
    const ExperimentConfig back = parse_config(to_ini(c));
    EXPECT_EQ(to_ini(back), to_ini(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashesSeparateDataFromTraining) {
    const ExperimentConfig a = parse_config("");
    const ExperimentConfig lr = parse_config("[train]\nlr = 0.02\n");
    const ExperimentConfig out = parse_config("[run]\nout = elsewhere\n");
    const ExperimentConfig noise = parse_config("[noise]\nrate = 0.2\n");
    EXPECT_NE(config_hash(a), config_hash(lr));
    EXPECT_EQ(data_hash(a), data_hash(lr));
    EXPECT_EQ(config_hash(a), config_hash(out));
    EXPECT_NE(data_hash(a), data_hash(noise));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, TwoSeedsDriveAllRandomness) {
    const ExperimentConfig a = parse_config("[data]\nseed = 4\n");
    EXPECT_EQ(a.blob_spec().seed, 4u);
    EXPECT_NE(a.noise_spec().seed, a.blob_spec().seed);
    EXPECT_EQ(parse_config("[data]\nseed = 4\n").noise_spec().seed, a.noise_spec().seed);
}

TEST_F(CliTest, GenWritesFilesWithConfiguredRowCounts) {
    ASSERT_EQ(gen(), kOk) << err.str();
    EXPECT_EQ(count_data_rows(dir / "out" / "train.csv"), 200);
    EXPECT_EQ(count_data_rows(dir / "out" / "test.csv"), 100);
    const auto h = read_header(dir / "out" / "manifest.txt");
    EXPECT_EQ(h.at("config_hash"), config_hash(load_config(config)));
    EXPECT_NE(slurp(dir / "out" / "manifest.txt").find("data_seed = 3"), std::string::npos);
}

TEST_F(CliTest, GenIsDeterministic) {
    ASSERT_EQ(gen(), kOk);
    const std::string first = slurp(dir / "out" / "train.csv");
    ASSERT_EQ(gen(), kOk);   // same config: overwrite allowed, identical bytes
    EXPECT_EQ(slurp(dir / "out" / "train.csv"), first);
}

TEST_F(CliTest, ManifestRecordsEmpiricalNoiseRate) {
    std::ofstream(config, std::ios::app) << "[noise]\nrate = 0.4\n";
    // Bigger split so the binomial bound is meaningful.
    std::string text = slurp(config);
    text.replace(text.find("train_per_class = 20"), 20, "train_per_class = 500");
    std::ofstream(config) << text;
    ASSERT_EQ(gen(), kOk) << err.str();
    const std::string m = slurp(dir / "out" / "manifest.txt");
    const auto pos = m.find("empirical_noise_rate = ");
    ASSERT_NE(pos, std::string::npos);
    const double rate = std::stod(m.substr(pos + 23));
    EXPECT_NEAR(rate, 0.4, 3.0 * std::sqrt(0.24 / 5000.0));
    const data::Dataset train = data::read_dataset_csv(dir / "out" / "train.csv", 10);
    EXPECT_DOUBLE_EQ(rate, data::empirical_noise_rate(train));
}

TEST_F(CliTest, TrainProducesMetricsAndSummary) {
    ASSERT_EQ(gen(), kOk);
    ASSERT_EQ(train(), kOk) << err.str();
    EXPECT_EQ(count_data_rows(dir / "out" / "metrics.csv"), 2);
    const std::string summary = slurp(dir / "out" / "summary.txt");
    for (const char* key : {"best_acc = ", "last_acc = ", "wall_time_s = ", "config_hash = "}) {
        EXPECT_NE(summary.find(key), std::string::npos) << key;
    }
    EXPECT_TRUE(fs::exists(dir / "out" / "model.ckpt"));
}

TEST_F(CliTest, TrainWithoutDatasetIsARuntimeError) {
    EXPECT_EQ(train(), kRuntimeError);
    EXPECT_NE(err.str().find("not found"), std::string::npos);
}

TEST_F(CliTest, MismatchedRerunRefusesWithoutForce) {
    ASSERT_EQ(gen(), kOk);
    ASSERT_EQ(train(), kOk);
    const std::string before = slurp(dir / "out" / "metrics.csv");
    opts.seed = 99;
    EXPECT_EQ(train(), kConfigError);
    EXPECT_NE(err.str().find("refusing to overwrite"), std::string::npos);
    EXPECT_EQ(slurp(dir / "out" / "metrics.csv"), before);
    opts.force = true;
    EXPECT_EQ(train(), kOk);
    EXPECT_NE(read_header(dir / "out" / "metrics.csv").at("config_hash"), read_header(dir / "out" / "train.csv").at("config_hash"));
}

TEST_F(CliTest, ForeignFilesAreProtected) {
    fs::create_directories(dir / "out");
    std::ofstream(dir / "out" / "train.csv") << "precious\n";
    EXPECT_EQ(gen(), kConfigError);
    EXPECT_EQ(slurp(dir / "out" / "train.csv"), "precious\n");
}

TEST_F(CliTest, DatasetFromOtherDataSettingsIsRejected) {
    ASSERT_EQ(gen(), kOk);
    std::ofstream(config, std::ios::app) << "[noise]\nrate = 0.2\n";
    EXPECT_EQ(train(), kConfigError);
}

TEST_F(CliTest, BaselineAndAblationFlags) {
    ASSERT_EQ(gen(), kOk);
    opts.out = dir / "baseline";
    opts.lnl = "ce";
    opts.no_snscl = true;
    ASSERT_EQ(train(), kOk) << err.str();
    EXPECT_NE(slurp(dir / "baseline" / "summary.txt").find("method = baseline"), std::string::npos);

    opts.out = dir / "plain";
    opts.no_snscl = false;
    opts.ablations = {"plain_scl"};
    ASSERT_EQ(train(), kOk) << err.str();
    EXPECT_NE(slurp(dir / "plain" / "summary.txt").find("method = snscl"), std::string::npos);
    const ExperimentConfig resolved = resolve(opts, "train");
    EXPECT_TRUE(resolved.training.ablation.plain_scl);

    opts.ablations = {"no-such-thing"};
    EXPECT_EQ(train(), kConfigError);
    opts.ablations.clear();
    opts.lnl = "mae";
    EXPECT_EQ(train(), kConfigError);
}

TEST_F(CliTest, ReliabilityDumpHasOneRowPerSamplePerEpoch) {
    ASSERT_EQ(gen(), kOk);
    std::string text = slurp(config);
    text.replace(text.find("[data]"), 6, "dump_reliability = true\n[data]");
    std::ofstream(config) << text;
    ASSERT_EQ(train(), kOk) << err.str();
    const std::string dump = slurp(dir / "out" / "reliability.csv");
    EXPECT_NE(dump.find("epoch,sample_id,loss,gamma,omega\n"), std::string::npos);
    EXPECT_EQ(count_data_rows(dir / "out" / "reliability.csv"), 2 * 200);
}

TEST_F(CliTest, CompareEmitsReportAndCurves) {
    ASSERT_EQ(cmd_compare(opts, log, err), kOk) << err.str();
    const std::string report = slurp(dir / "out" / "compare_report.txt");
    EXPECT_NE(report.find("baseline"), std::string::npos);
    EXPECT_NE(report.find("snscl"), std::string::npos);
    EXPECT_NE(report.find("best"), std::string::npos);
    EXPECT_NE(report.find("last"), std::string::npos);
    const std::string curves = slurp(dir / "out" / "curves.csv");
    EXPECT_NE(curves.find("epoch,acc_baseline,acc_snscl\n"), std::string::npos);
    EXPECT_EQ(count_data_rows(dir / "out" / "curves.csv"), 2);
    opts.no_snscl = true;
    EXPECT_EQ(cmd_compare(opts, log, err), kConfigError);
}

TEST_F(CliTest, BadConfigPathIsAConfigError) {
    opts.config = dir / "missing.ini";
    EXPECT_EQ(gen(), kConfigError);
}
