#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "crossnet/corpus.hpp"
#include "support.hpp"

using namespace crossnet;

namespace {

using Tokens = std::vector<std::string>;

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

std::string glove_line(const std::string& word, std::size_t dim, double base) {
  std::ostringstream os;
  os.precision(17);
  os << word;
  for (std::size_t i = 0; i < dim; ++i) os << ' ' << base + 0.001 * static_cast<double>(i);
  return os.str();
}

}  // namespace

TEST(Tokenize, PlainSentence) {
  EXPECT_EQ(tokenize("We need to protect our islands!"), (Tokens{"we", "need", "to", "protect", "our", "islands", "!"}));
}

TEST(Tokenize, HashtagAndUrl) {
  EXPECT_EQ(tokenize("#SemST http://t.co/x reef"), (Tokens{"<hashtag>", "semst", "<url>", "reef"}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, MentionsApostrophesAndPunctuation) {
  EXPECT_EQ(tokenize("@Hillary don't... www.x.org"),
            (Tokens{"<user>", "don't", ".", ".", ".", "<url>"}));
  EXPECT_EQ(tokenize("Feminist Movement"), (Tokens{"feminist", "movement"}));
}

TEST(Tokenize, PureFunction) {
  const std::string s = "RT @a: Is THIS #Real? https://x.y/z";
  EXPECT_EQ(tokenize(s), tokenize(s));
}

TEST(Stance, NoneMapsToNeither) {
  EXPECT_EQ(parse_stance("NONE"), Stance::Neither);
  EXPECT_EQ(parse_stance("favor"), Stance::Favor);
  EXPECT_EQ(parse_stance("AGAINST"), Stance::Against);
  EXPECT_FALSE(parse_stance("MAYBE").has_value());
}

TEST(Loader, ThreeRows) {
  std::istringstream in(
      "ID\tTarget\tTweet\tStance\n"
      "1\tFeminist Movement\tWomen deserve equality #SemST\tFAVOR\n"
      "2\tLegalization of Abortion\tEvery life matters\tAGAINST\n"
      "3\tFeminist Movement\tNice weather today\tNONE\n");
  const auto c = parse_semeval(in);
  ASSERT_EQ(c.instances.size(), 3u);
  EXPECT_EQ(c.instances[0].stance, Stance::Favor);
  EXPECT_EQ(c.instances[1].target, "Legalization of Abortion");
  EXPECT_EQ(c.instances[2].stance, Stance::Neither);
  EXPECT_EQ(c.per_target.at("Feminist Movement").total, 2u);
  EXPECT_EQ(c.for_target("Feminist Movement").size(), 2u);
}

TEST(Loader, CrlfAndBomTolerated) {
  std::istringstream in(
      "\xEF\xBB\xBFID\tTarget\tTweet\tStance\r\n"
      "1\tDonald Trump\tMake it so\tAGAINST\r\n");
  const auto c = parse_semeval(in);
  ASSERT_EQ(c.instances.size(), 1u);
  EXPECT_EQ(c.instances[0].tokens, (Tokens{"make", "it", "so"}));
  EXPECT_EQ(c.instances[0].stance, Stance::Against);
}

TEST(Loader, MissingColumnNamed) {
  std::istringstream in("ID\tTarget\tTweet\n1\tX\thello\n");
  try {
    parse_semeval(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Stance"), std::string::npos);
  }
}

TEST(Loader, UnknownStanceReportsRow) {
  std::istringstream in("ID\tTarget\tTweet\tStance\n1\tX\thello\tFAVOR\n2\tX\tbye\tMAYBE\n");
  try {
    parse_semeval(in);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("MAYBE"), std::string::npos) << msg;
  }
}

TEST(Loader, EmptyTweetsRejectedAndCounted) {
  std::istringstream in("ID\tTarget\tTweet\tStance\n1\tX\t   \tFAVOR\n2\tX\tok\tFAVOR\n");
  const auto c = parse_semeval(in);
  EXPECT_EQ(c.instances.size(), 1u);
  EXPECT_EQ(c.rejected_empty, 1u);
}

TEST(Loader, MissingFileIsIoError) {
  EXPECT_THROW(load_semeval("/nonexistent/semeval.tsv"), std::ios_base::failure);
}

TEST(Loader, ParseSerializeParseFixedPoint) {
  const auto toy = testing_support::toy_instances(40, 3);
  std::ostringstream a;
  write_semeval(a, toy);
  std::istringstream in1(a.str());
  const auto c1 = parse_semeval(in1);
  std::ostringstream b;
  write_semeval(b, c1.instances);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in2(b.str());
  const auto c2 = parse_semeval(in2);
  ASSERT_EQ(c1.instances.size(), c2.instances.size());
  for (std::size_t i = 0; i < c1.instances.size(); ++i) {
    EXPECT_EQ(c1.instances[i].id, c2.instances[i].id);
    EXPECT_EQ(c1.instances[i].tokens, c2.instances[i].tokens);
    EXPECT_EQ(c1.instances[i].stance, c2.instances[i].stance);
  }
}

TEST(Loader, ReportFields) {
  const auto toy = testing_support::toy_instances(30, 1);
  const auto r = loader_report("Toy", toy, 0.25);
  EXPECT_EQ(r.at("total").get<int>(), 30);
  EXPECT_NEAR(r.at("favor_pct").get<double>(), 100.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.at("oov_rate").get<double>(), 0.25);
}

TEST(Targets, AbbreviationsResolve) {
  const auto m = TargetMap::builtin();
  EXPECT_EQ(m.resolve("FM"), "Feminist Movement");
  EXPECT_EQ(m.resolve("la"), "Legalization of Abortion");
  EXPECT_EQ(m.resolve("Hillary Clinton"), "Hillary Clinton");
  try {
    m.resolve("XX");
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (const char* k : {"CC", "FM", "HC", "LA", "DT"}) EXPECT_NE(msg.find(k), std::string::npos);
  }
}

TEST(Targets, ShippedFileMatchesBuiltin) {
  const auto file = TargetMap::load(std::string(CROSSNET_SOURCE_DIR) + "/data/targets.json");
  EXPECT_EQ(file.entries(), TargetMap::builtin().entries());
}

TEST(Embeddings, PretrainedRowPassesThrough) {
  Vocabulary v;
  v.add("the");
  const std::size_t dim = 200;
  std::istringstream in(glove_line("of", dim, 0.5) + "\n" + glove_line("the", dim, 0.1) + "\n");
  const auto emb = build_embeddings(v, in, 1, dim);
  const auto id = v.id("the");
  for (std::size_t i = 0; i < dim; ++i) EXPECT_EQ(emb.table.at(id, i), 0.1 + 0.001 * static_cast<double>(i));
  EXPECT_TRUE(emb.pretrained[id]);
  EXPECT_DOUBLE_EQ(emb.coverage, 0.5);  // <unk> is the other row
}

TEST(Embeddings, OovRowsDeterministic) {
  Vocabulary v;
  v.add("zzqqx");
  std::istringstream a(""), b("");
  const auto e1 = build_embeddings(v, a, 9, 200);
  const auto e2 = build_embeddings(v, b, 9, 200);
  EXPECT_EQ(e1.table, e2.table);
  const auto e3 = random_embeddings(v, 10, 200);
  EXPECT_FALSE(e1.table == e3.table);
  double s2 = 0.0;
  const auto row = oov_vector("zzqqx", 9, 20000);
  for (double x : row) s2 += x * x;
  EXPECT_NEAR(std::sqrt(s2 / 20000.0), kOovStddev, 0.005);
}

TEST(Embeddings, WrongDimensionRejected) {
  Vocabulary v;
  v.add("the");
  std::istringstream in(glove_line("the", 50, 0.1));
  EXPECT_THROW(build_embeddings(v, in, 1, 200), DataError);
  std::istringstream other(glove_line("unrelated", 199, 0.1));
  EXPECT_THROW(build_embeddings(v, other, 1, 200), DataError);
  EXPECT_THROW(build_embeddings(v, std::string("/nonexistent/glove.txt"), 1), std::ios_base::failure);
}

TEST(Embeddings, OovRateCountsOccurrences) {
  Vocabulary v;
  v.add_all({"a", "b"});
  std::istringstream in(glove_line("a", 4, 0.0));
  const auto emb = build_embeddings(v, in, 1, 4);
  Instance inst;
  inst.tokens = {"a", "a", "b", "c"};
  EXPECT_DOUBLE_EQ(oov_rate({inst}, v, emb), 0.5);
}

TEST(Folds, ExactDivisibility) {
  std::vector<Stance> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(stance_from_index(i % 3));
  Rng rng(1);
  const auto plan = stratified_folds(labels, 10, rng);
  for (const auto& f : plan.folds) {
    ASSERT_EQ(f.size(), 3u);
    std::array<int, 3> c{};
    for (auto i : f) ++c[stance_index(labels[i])];
    EXPECT_EQ(c, (std::array<int, 3>{1, 1, 1}));
  }
}

TEST(Folds, Pigeonhole) {
  std::vector<Stance> labels;
  for (int i = 0; i < 33; ++i) labels.push_back(stance_from_index(i % 3));
  Rng rng(2);
  const auto plan = stratified_folds(labels, 10, rng);
  for (const auto& f : plan.folds) {
    EXPECT_GE(f.size(), 3u);
    EXPECT_LE(f.size(), 4u);
    std::array<int, 3> c{};
    for (auto i : f) ++c[stance_index(labels[i])];
    for (int x : c) EXPECT_TRUE(x == 1 || x == 2);
  }
}

TEST(Folds, SmallClassNamed) {
  std::vector<Stance> labels(20, Stance::Favor);
  for (int i = 0; i < 9; ++i) labels.push_back(Stance::Against);
  for (int i = 0; i < 12; ++i) labels.push_back(Stance::Neither);
  Rng rng(3);
  try {
    stratified_folds(labels, 10, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("AGAINST"), std::string::npos) << e.what();
  }
  EXPECT_THROW(stratified_folds(labels, 1, rng), std::invalid_argument);
}

namespace {

void expect_stratified_partition(const std::vector<Stance>& labels, const FoldPlan& plan) {
  std::vector<int> seen(labels.size(), 0);
  std::vector<std::array<std::size_t, 3>> per(plan.k);
  for (std::size_t f = 0; f < plan.k; ++f)
    for (auto i : plan.folds[f]) {
      ++seen[i];
      ++per[f][stance_index(labels[i])];
    }
  for (int s : seen) ASSERT_EQ(s, 1);  // union is everything, pairwise disjoint
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& p : per) {
      lo = std::min(lo, p[c]);
      hi = std::max(hi, p[c]);
    }
    EXPECT_LE(hi - lo, 1u);
  }
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& f : plan.folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  EXPECT_LE(hi - lo, 1u);
}

}  // namespace

TEST(Folds, RandomDatasetsArePartitionsAndStratified) {
  Rng gen(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + gen.below(9);
    std::vector<Stance> labels;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t n = k + gen.below(40);
      for (std::size_t i = 0; i < n; ++i) labels.push_back(stance_from_index(c));
    }
    gen.shuffle(labels);
    Rng rng(gen.next_u64());
    expect_stratified_partition(labels, stratified_folds(labels, k, rng));
  }
}

TEST(Folds, DrivenSolelyByRng) {
  std::vector<Stance> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(stance_from_index(i % 3));
  Rng a(5), b(5), c(6);
  EXPECT_EQ(stratified_folds(labels, 10, a).folds, stratified_folds(labels, 10, b).folds);
  EXPECT_NE(stratified_folds(labels, 10, a).folds, stratified_folds(labels, 10, c).folds);
}

TEST(RealData, LegalizationOfAbortionFolds) {
  const char* path = env("CROSSNET_SEMEVAL_TSV");
  if (!path) GTEST_SKIP() << "CROSSNET_SEMEVAL_TSV not set";
  const auto corpus = load_semeval(path);
  const auto la = corpus.for_target(TargetMap::builtin().resolve("LA"));
  std::vector<Stance> labels;
  for (const auto& i : la) labels.push_back(i.stance);
  Rng rng(7);
  const auto plan = stratified_folds(labels, 10, rng);
  expect_stratified_partition(labels, plan);
  std::cout << "LA instances: " << la.size() << "\n";
}

TEST(RealData, GloveMatrixReproducible) {
  const char* tsv = env("CROSSNET_SEMEVAL_TSV");
  const char* glove = env("CROSSNET_GLOVE");
  if (!tsv || !glove) GTEST_SKIP() << "CROSSNET_SEMEVAL_TSV / CROSSNET_GLOVE not set";
  const auto corpus = load_semeval(tsv);
  Vocabulary v;
  for (const auto& i : corpus.instances) v.add_all(i.tokens);
  const auto a = build_embeddings(v, std::string(glove), 1);
  const auto b = build_embeddings(v, std::string(glove), 1);
  std::cout << "coverage: " << a.coverage << "\n";
  EXPECT_EQ(a.table, b.table);
  EXPECT_GT(a.coverage, 0.5);
}
