#include "test_util.hpp"

#include <cstdio>
#include <sys/wait.h>

using namespace pfm;
using namespace pfm::test;
namespace fs = std::filesystem;

TEST(MatrixIO, RoundTripIsExact) {
  const auto dir = temp_dir("matrix");
  std::mt19937 rng(21);
  Matrix m = random_matrix(7, 5, rng);
  m(0, 0) = std::numeric_limits<double>::denorm_min();
  m(1, 1) = -0.0;
  write_matrix(dir / "m.bin", m);
  const Matrix back = read_matrix(dir / "m.bin");
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 5);
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 35), 0);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 24u + 35u * 8u);
  write_matrix(dir / "empty.bin", Matrix(0, 3));
  EXPECT_EQ(read_matrix(dir / "empty.bin").cols(), 3);
}

TEST(MatrixIO, RejectsBadFiles) {
  const auto dir = temp_dir("matrix_bad");
  EXPECT_THROW(read_matrix(dir / "missing.bin"), InputError);
  write_text(dir / "magic.bin", "NOTAMATRIX______________________");
  EXPECT_THROW(read_matrix(dir / "magic.bin"), InputError);
  write_matrix(dir / "m.bin", Matrix::Ones(4, 4));
  fs::resize_file(dir / "m.bin", 24 + 8 * 15);
  EXPECT_THROW(read_matrix(dir / "m.bin"), InputError);
  write_text(dir / "short.bin", "PFMMAT01\x01");
  EXPECT_THROW(read_matrix(dir / "short.bin"), InputError);
}

TEST(Csv, DoublesRoundTrip) {
  const auto dir = temp_dir("csv");
  const std::vector<double> values = {0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -4.9e-324, 123456789.123456789};
  {
    CsvWriter w(dir / "t.csv", {"i", "x"});
    for (std::size_t i = 0; i < values.size(); ++i) w.row(i, values[i]);
    w.close();
  }
  const CsvTable t = read_csv(dir / "t.csv");
  ASSERT_EQ(t.rows.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(parse_index(t.rows[i][t.column("i")]), static_cast<Index>(i));
    EXPECT_EQ(parse_double(t.rows[i][t.column("x")]), values[i]);
  }
  EXPECT_THROW((void)t.column("nope"), InputError);
  EXPECT_THROW(parse_double("1.5x"), InputError);
  EXPECT_THROW(parse_index("2.5"), InputError);
}

TEST(Config, LoadSetValidate) {
  const auto dir = temp_dir("config");
  save_mesh(dir / "a.off", shapes::icosphere(1));
  write_text(dir / "job.cfg", "# comment\npart = " + (dir / "a.off").string() + "\nfull=" + (dir / "a.off").string() +
                                  "\nk = 12  # trailing\nrefine = false\nmu2=2.5\n");
  JobConfig c;
  c.load(dir / "job.cfg");
  EXPECT_EQ(c.energy.k, 12);
  EXPECT_FALSE(c.solver.refine);
  EXPECT_EQ(c.energy.mu2, 2.5);
  EXPECT_NO_THROW(c.validate());
  for (const auto& key : job_config_keys()) EXPECT_NO_THROW(JobConfig{}.set(key, key == "refine" || key == "refine_energy_guard" ? "1" : "3")) << key;
  EXPECT_THROW(c.set("bogus", "1"), InputError);
  EXPECT_THROW(c.set("k", "ten"), InputError);
  EXPECT_THROW(c.set("refine", "maybe"), InputError);
  c.set("full", (dir / "missing.off").string());
  EXPECT_THROW(c.validate(), InputError);
  write_text(dir / "bad.cfg", "k 12\n");
  EXPECT_THROW(JobConfig{}.load(dir / "bad.cfg"), InputError);
}

namespace {

struct CliRun {
  int code;
  std::string err;
};

CliRun cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(PFM_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(dir / "stderr.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

} // namespace

TEST(Cli, ExitCodesAndOutputs) {
  const auto dir = temp_dir("cli");
  EXPECT_EQ(cli("", dir).code, 2);
  EXPECT_EQ(cli("match --config " + (dir / "missing.cfg").string(), dir).code, 2);
  EXPECT_EQ(cli("match --set bogus=1", dir).code, 2);

  const CliRun bad_mesh = [&] {
    write_text(dir / "broken.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n");
    return cli("match --part " + (dir / "broken.off").string() + " --full " + (dir / "broken.off").string() +
                   " --out " + (dir / "o").string(),
               dir);
  }();
  EXPECT_EQ(bad_mesh.code, 2);
  EXPECT_NE(bad_mesh.err.find("\"error\""), std::string::npos);

  ASSERT_EQ(cli("gen synthetic --level 2 --out " + (dir / "syn").string(), dir).code, 0);
  for (const char* f : {"full.off", "part.off", "truth.csv", "match.cfg"}) EXPECT_TRUE(fs::exists(dir / "syn" / f)) << f;
  const CliRun ok = cli("match --config " + (dir / "syn" / "match.cfg").string() + " --k 10 --max_outer 1 --out " +
                         (dir / "m").string(),
                     dir);
  ASSERT_EQ(ok.code, 0) << ok.err;
  for (const char* f : {"C.bin", "v.csv", "pi.csv", "corr.csv", "energy.csv", "refine.csv", "report.txt"})
    EXPECT_TRUE(fs::exists(dir / "m" / f)) << f;
  EXPECT_EQ(read_matrix(dir / "m" / "C.bin").rows(), 10);
  ASSERT_EQ(cli("eval --corr " + (dir / "m" / "corr.csv").string() + " --truth " + (dir / "syn" / "truth.csv").string() +
                    " --full " + (dir / "syn" / "full.off").string() + " --out " + (dir / "e").string(),
                dir)
                .code,
            0);
  const CsvTable curve = read_csv(dir / "e" / "curve.csv");
  EXPECT_EQ(curve.rows.size(), 101u);
}
