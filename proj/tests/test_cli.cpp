#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string err;
};

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "otae_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void put(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Run otae(const std::string& args) {
    const std::string err = path("stderr.txt");
    const std::string cmd = std::string(OTAE_CLI) + " " + args + " >" + path("stdout.txt") + " 2>" + err;
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

const std::string kSmallTrain = " --epochs 3 --batch-size 32 --latent-dim 3 --encoder-hidden 8 --classifier-hidden 6";

}  // namespace

TEST_CASE("synth writes deterministic artifacts") {
    const auto a = path("d.csv");
    REQUIRE(otae("synth --subjects 6 --classes 3 --dim 12 --seed 42 -o " + a).code == 0);
    const std::string csv = slurp(a), side = slurp(a + ".config.json"), man = slurp(a + ".manifest.json");
    CHECK(csv.rfind("subject_id,label,f0,", 0) == 0);
    CHECK(csv.find("\ns5,") != std::string::npos);
    CHECK(json::parse(side).at("seed") == 42);
    REQUIRE(otae("synth --subjects 6 --classes 3 --dim 12 --seed 42 -o " + a).code == 0);
    CHECK(slurp(a) == csv);
    CHECK(slurp(a + ".config.json") == side);
    CHECK(slurp(a + ".manifest.json") == man);

    CHECK(otae("synth --subjects 6").code == 1);
    CHECK(otae("frobnicate").code == 1);
}

TEST_CASE("weights subcommand") {
    put(path("twins.csv"), "subject_id,label,f0,f1\na,0,1,2\na,1,3,5\nb,0,1,2\nb,1,3,5\n");
    REQUIRE(otae("weights " + path("twins.csv") + " --beta 0.5 -o " + path("twins.json")).code == 0);
    const auto w = json::parse(slurp(path("twins.json")));
    CHECK(w.at("subjects").at("a").at("lambda").get<double>() == doctest::Approx(0.25));
    CHECK(w.at("subjects").at("b").at("lambda").get<double>() == doctest::Approx(0.25));
    CHECK(w.at("lambda_g").get<double>() == doctest::Approx(0.5));
    CHECK(w.at("mode") == "budget");

    REQUIRE(otae("synth --subjects 3 --dim 4 --per-class 10 --seed 3 -o " + path("three.csv")).code == 0);
    const auto paper = otae("weights " + path("three.csv") + " --mode paper");
    CHECK(paper.code == 1);
    CHECK(paper.err.find("lambda_g = 2 - S") != std::string::npos);

    REQUIRE(otae("synth --subjects 5 --dim 6 --per-class 10 --outlier 2:5 --seed 4 -o " + path("out.csv")).code == 0);
    REQUIRE(otae("weights " + path("out.csv") + " -o " + path("out.json")).code == 0);
    const auto o = json::parse(slurp(path("out.json")));
    const double outlier = o.at("subjects").at("s2").at("lambda").get<double>();
    for (const auto& [id, entry] : o.at("subjects").items())
        if (id != "s2") CHECK(entry.at("lambda").get<double>() > outlier);
}

TEST_CASE("train, project and data errors") {
    const auto data = path("t.csv");
    REQUIRE(otae("synth --subjects 3 --classes 2 --dim 5 --per-class 10 --seed 9 -o " + data).code == 0);
    CHECK(otae("train " + data + kSmallTrain + " --loss baseline -o " + path("b.ckpt")).code == 0);
    CHECK(otae("train " + data + kSmallTrain + " --loss weighted -o " + path("w.ckpt")).code == 0);
    CHECK(json::parse(slurp(path("w.ckpt.history.json"))).at("epochs").size() == 3);

    REQUIRE(otae("train " + data + " --epochs 0 -o " + path("init.ckpt")).code == 0);
    REQUIRE(otae("project " + data + " --checkpoint " + path("init.ckpt") + " -o " + path("p.csv")).code == 0);
    std::istringstream lines(slurp(path("p.csv")));
    std::string line;
    std::getline(lines, line);
    CHECK(line == "pc1,pc2,pc3,label,subject_id,split");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == 60);

    put(path("bad.csv"), "subject_id,label,f0,f1\na,0,1,2\na,1,3\n");
    const auto bad = otae("train " + path("bad.csv") + " -o " + path("x.ckpt"));
    CHECK(bad.code == 2);
    CHECK(bad.err.find("bad.csv:3:") != std::string::npos);
    CHECK(otae("train " + path("missing.csv") + " -o " + path("x.ckpt")).code == 2);
}

TEST_CASE("config file precedence") {
    const auto data = path("c.csv");
    REQUIRE(otae("synth --subjects 3 --classes 2 --dim 4 --per-class 6 --seed 2 -o " + data).code == 0);
    put(path("run.toml"), "[train]\nepochs = 2\nlr = 0.01\n");
    REQUIRE(otae("--config " + path("run.toml") + " train " + data + " --epochs 1 -o " + path("c.ckpt")).code == 0);
    const auto m = json::parse(slurp(path("c.ckpt.manifest.json")));
    CHECK(m.at("resolved_config").at("epochs") == 1);
    CHECK(m.at("resolved_config").at("learning_rate").get<double>() == doctest::Approx(0.01));
    REQUIRE(otae("--config " + path("run.toml") + " train " + data + " -o " + path("c.ckpt")).code == 0);
    CHECK(json::parse(slurp(path("c.ckpt.manifest.json"))).at("resolved_config").at("epochs") == 2);
}

TEST_CASE("loso and compare") {
    const auto data = path("l.csv");
    REQUIRE(otae("synth --subjects 3 --classes 2 --dim 4 --per-class 8 --seed 5 -o " + data).code == 0);
    REQUIRE(otae("loso " + data + kSmallTrain + " --jobs 2 -o " + path("loso.json")).code == 0);
    CHECK(json::parse(slurp(path("loso.json"))).at("folds").size() == 3);

    REQUIRE(otae("compare " + data + kSmallTrain + " --jobs 3 -o " + path("c1.json")).code == 0);
    REQUIRE(otae("compare " + data + kSmallTrain + " --jobs 1 -o " + path("c2.json")).code == 0);
    auto strip = [](json j) {
        j.erase("wall_seconds");
        for (auto& f : j.at("folds"))
            for (auto& side : f) side.erase("wall_seconds");
        return j;
    };
    const auto r1 = json::parse(slurp(path("c1.json")));
    CHECK(strip(r1) == strip(json::parse(slurp(path("c2.json")))));
    CHECK(r1.contains("split_fingerprints"));

    const auto broken = otae("loso " + data + kSmallTrain + " --lr 1e300 -o " + path("broken.json"));
    CHECK(broken.code == 3);
    CHECK(broken.err.find("fold 0") != std::string::npos);
}
