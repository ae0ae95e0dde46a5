// end-to-end checks that drive the installed binary exactly as an operator
// would: spawn, capture, compare bytes
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("dmh_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

RunResult run_cli(const std::string& args) {
    static int seq = 0;
    const fs::path dir = fs::temp_directory_path() / "dmh_cli_io";
    fs::create_directories(dir);
    const fs::path out = dir / ("out" + std::to_string(seq) + ".txt");
    const fs::path err = dir / ("err" + std::to_string(seq) + ".txt");
    ++seq;
    const std::string cmd = std::string(DMH_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// file-by-file byte comparison of two directory trees
void require_identical_trees(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::sort(rel.begin(), rel.end());
    REQUIRE(!rel.empty());
    for (const auto& r : rel) {
        INFO("file ", r.string());
        REQUIRE(fs::exists(b / r));
        CHECK(slurp(a / r) == slurp(b / r));
    }
}

const std::string kSynthFlags =
    "--k 4 --per-class 4 --val-per-class 2 --test-per-class 2 --d 8 --regions 2 "
    "--noise 0.1 --seed 11";
const std::string kTrainFlags =
    "--u 8 --layers 1 --encoder-heads 2 --fusion-heads 2 --latent 4 "
    "--batch 4 --epochs 3 --seed 7 --tag synthetic";

// one shared tiny dataset + trained run for the read-only subcommand tests
struct Fixture {
    TempDir top;
    fs::path data, run;
    Fixture() {
        data = top.path / "data";
        run = top.path / "run";
        REQUIRE(run_cli("synth " + kSynthFlags + " --out " + data.string()).code == 0);
        REQUIRE(run_cli("train --data " + (data / "manifest.jsonl").string() + " --out " +
                        run.string() + " " + kTrainFlags)
                    .code == 0);
    }
    std::string ckpt() const { return (run / "checkpoints" / "epoch_0003.ckpt").string(); }
    std::string manifest() const { return (data / "manifest.jsonl").string(); }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("no subcommand or bad flags exit with the usage code") {
    CHECK(run_cli("").code == 64);
    CHECK(run_cli("synth").code == 64);                 // --out is required
    CHECK(run_cli("train --nonsense 3").code == 64);
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("synth --help").code == 0);
}

TEST_CASE("synth writes a self-describing tree and is seed-deterministic") {
    TempDir t;
    const fs::path a = t.path / "a", b = t.path / "b";
    const auto ra = run_cli("synth " + kSynthFlags + " --out " + a.string());
    REQUIRE(ra.code == 0);
    CHECK(ra.out.find("manifest.jsonl") != std::string::npos);
    REQUIRE(run_cli("synth " + kSynthFlags + " --out " + b.string()).code == 0);
    require_identical_trees(a, b);

    const auto spec = nlohmann::json::parse(slurp(a / "spec.json"));
    CHECK(spec.at("k") == 4);
    CHECK(spec.at("d") == 8);
    CHECK(spec.at("seed") == 11);
    CHECK(spec.at("train_per_class") == 4);

    std::size_t features = 0;
    for (const auto& e : fs::directory_iterator(a / "features"))
        features += e.is_regular_file();
    CHECK(features == 2 * (4 + 2 + 2));
}

TEST_CASE("train leaves the documented output layout behind") {
    const Fixture& f = fixture();
    CHECK(fs::exists(f.run / "checkpoints" / "epoch_0001.ckpt"));
    CHECK(fs::exists(f.run / "checkpoints" / "epoch_0002.ckpt"));
    CHECK(fs::exists(f.run / "checkpoints" / "epoch_0003.ckpt"));
    CHECK(fs::exists(f.run / "reports"));

    const std::string log = slurp(f.run / "logs" / "train.jsonl");
    std::istringstream is(log);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        ++rows;
        CHECK(j.at("epoch") == rows);
        CHECK(j.at("pred_loss").is_number());
        CHECK(j.at("match_loss").is_number());
        CHECK(j.at("train_accuracy").is_number());
        CHECK(j.at("timing").at("seconds").is_number());
    }
    CHECK(rows == 3);
}

TEST_CASE("train prints a final metrics line and honours --mu 0") {
    const Fixture& f = fixture();
    TempDir t;
    const auto r = run_cli("train --data " + f.manifest() + " --out " +
                           (t.path / "mu0").string() + " " + kTrainFlags + " --mu 0");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("final:") != std::string::npos);
    CHECK(r.out.find("train_accuracy=") != std::string::npos);
    CHECK(r.out.find("validation_accuracy=") != std::string::npos);

    // the matching term is live by default, so silencing it must change the fit
    CHECK(slurp(t.path / "mu0" / "checkpoints" / "epoch_0003.ckpt") !=
          slurp(f.run / "checkpoints" / "epoch_0003.ckpt"));
}

TEST_CASE("train is byte-deterministic apart from the timing key") {
    const Fixture& f = fixture();
    TempDir t;
    const fs::path again = t.path / "again";
    REQUIRE(run_cli("train --data " + f.manifest() + " --out " + again.string() + " " +
                    kTrainFlags)
                .code == 0);
    for (int e = 1; e <= 3; ++e) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04d.ckpt", e);
        CHECK(slurp(f.run / "checkpoints" / name) == slurp(again / "checkpoints" / name));
    }
    std::istringstream la(slurp(f.run / "logs" / "train.jsonl"));
    std::istringstream lb(slurp(again / "logs" / "train.jsonl"));
    std::string sa, sb;
    while (std::getline(la, sa) && std::getline(lb, sb)) {
        auto ja = nlohmann::json::parse(sa), jb = nlohmann::json::parse(sb);
        ja.erase("timing");
        jb.erase("timing");
        CHECK(ja == jb);
    }
}

TEST_CASE("train accepts field masks and a config file overridden by flags") {
    const Fixture& f = fixture();
    TempDir t;
    CHECK(run_cli("train --data " + f.manifest() + " --out " + (t.path / "m").string() +
                  " " + kTrainFlags + " --mask-entities --mask-demographics --epochs 1")
              .code == 0);

    const fs::path cfg = t.path / "cfg.json";
    {
        std::ofstream os(cfg);
        os << R"({"model":{"encoder":{"u":8,"layers":1,"heads":2},)"
           << R"("disentangle":{"latent":4}},)"
           << R"("train":{"batch":4,"epochs":5,"seed":7,"tag":"synthetic"}})";
    }
    const fs::path c1 = t.path / "c1";
    // --epochs 2 must beat the file's epochs:5
    REQUIRE(run_cli("train --data " + f.manifest() + " --out " + c1.string() +
                    " --config " + cfg.string() + " --epochs 2")
                .code == 0);
    CHECK(fs::exists(c1 / "checkpoints" / "epoch_0002.ckpt"));
    CHECK(!fs::exists(c1 / "checkpoints" / "epoch_0003.ckpt"));

    CHECK(run_cli("train --data " + f.manifest() + " --out " + (t.path / "c2").string() +
                  " --config " + (t.path / "nope.json").string())
              .code == 2);
}

TEST_CASE("train resumes from a checkpoint to the bit-identical end state") {
    const Fixture& f = fixture();
    TempDir t;
    const fs::path half = t.path / "half";
    REQUIRE(run_cli("train --data " + f.manifest() + " --out " + half.string() + " " +
                    "--u 8 --layers 1 --encoder-heads 2 --fusion-heads 2 --latent 4 "
                    "--batch 4 --epochs 2 --seed 7 --tag synthetic")
                .code == 0);
    const fs::path rest = t.path / "rest";
    REQUIRE(run_cli("train --data " + f.manifest() + " --out " + rest.string() + " " +
                    kTrainFlags + " --resume " +
                    (half / "checkpoints" / "epoch_0002.ckpt").string())
                .code == 0);
    CHECK(slurp(rest / "checkpoints" / "epoch_0003.ckpt") ==
          slurp(f.run / "checkpoints" / "epoch_0003.ckpt"));
}

TEST_CASE("eval rejects an unknown split with a usage error that names the real ones") {
    const Fixture& f = fixture();
    const auto r = run_cli("eval --checkpoint " + f.ckpt() + " --data " + f.manifest() +
                           " --split dev");
    CHECK(r.code == 64);
    CHECK(r.err.find("unknown split") != std::string::npos);
    CHECK(r.err.find("train") != std::string::npos);
    CHECK(r.err.find("validation") != std::string::npos);
    CHECK(r.err.find("test") != std::string::npos);
}

TEST_CASE("eval is deterministic and obeys --format") {
    const Fixture& f = fixture();
    const std::string base =
        "eval --checkpoint " + f.ckpt() + " --data " + f.manifest() + " --split test";
    const auto r1 = run_cli(base);
    const auto r2 = run_cli(base);
    REQUIRE(r1.code == 0);
    CHECK(r1.out == r2.out);
    CHECK(r1.out.find("accuracy") != std::string::npos);

    const auto rj = run_cli(base + " --format json");
    REQUIRE(rj.code == 0);
    const auto j = nlohmann::json::parse(rj.out);  // exactly one JSON document
    CHECK(j.at("split") == "test");
    CHECK(j.at("n") == 4);
    CHECK(j.at("accuracy").is_number());
    CHECK(j.at("weighted_f1").is_number());

    const auto rt = run_cli(base + " --format table");
    REQUIRE(rt.code == 0);
    CHECK(rt.out.find('{') == std::string::npos);

    TempDir t;
    REQUIRE(run_cli(base + " --format json --out " + t.path.string()).code == 0);
    const auto file = nlohmann::json::parse(slurp(t.path / "reports" / "eval_test.json"));
    CHECK(file == j);
}

TEST_CASE("eval exit code distinguishes a missing checkpoint from bad usage") {
    const Fixture& f = fixture();
    CHECK(run_cli("eval --checkpoint /no/such.ckpt --data " + f.manifest() +
                  " --split test")
              .code == 2);
    CHECK(run_cli("eval --checkpoint " + f.ckpt() + " --split test").code == 64);
}

TEST_CASE("retrieve prints a ranked table and repeats itself for a repeated query") {
    const Fixture& f = fixture();
    const std::string base = "retrieve --checkpoint " + f.ckpt() + " --data " +
                             f.manifest() + " --query \"topic0a attack\"";
    const auto r1 = run_cli(base + " --k 5");
    REQUIRE(r1.code == 0);
    CHECK(r1.out.find("rank") != std::string::npos);
    CHECK(r1.out.find("similarity") != std::string::npos);
    CHECK(r1.out.find("label") != std::string::npos);
    CHECK(run_cli(base + " --k 5").out == r1.out);

    std::istringstream is(r1.out);
    std::string line;
    std::size_t rows = 0;
    bool labels_ok = true;
    while (std::getline(is, line)) {
        if (rows > 0)
            labels_ok = labels_ok && (line.find("hateful") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 1 + 5);
    CHECK(labels_ok);

    // more neighbours than samples: return everything, still ranked
    const auto rall = run_cli(base + " --k 999");
    REQUIRE(rall.code == 0);
    std::istringstream isall(rall.out);
    rows = 0;
    while (std::getline(isall, line)) ++rows;
    CHECK(rows == 1 + 2 * (4 + 2 + 2));
}

TEST_CASE("gradcheck passes clean and fails once gradients are sabotaged") {
    const auto ok = run_cli("gradcheck --seed 5");
    CHECK(ok.code == 0);
    CHECK(ok.out.find("max rel err") != std::string::npos);
    CHECK(ok.out.find("full-model") != std::string::npos);
    CHECK(ok.out.find("PASS") != std::string::npos);

    const auto bad = run_cli("gradcheck --seed 5 --inject-sign-flip");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL") != std::string::npos);
}
