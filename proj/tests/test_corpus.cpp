#include <catch2/catch_amalgamated.hpp>

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "manifold_embed/corpus.hpp"

using namespace manifold_embed;

namespace {

std::string temp_path(const std::string& name) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() / "manifold_embed_tests";
    std::filesystem::create_directories(dir);
    return (dir / (std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name))
        .string();
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = temp_path(name);
    std::ofstream(path, std::ios::binary) << content;
    return path;
}

std::string write_temp_gz(const std::string& name, const std::string& content) {
    const std::string path = temp_path(name);
    gzFile gz = gzopen(path.c_str(), "wb");
    REQUIRE(gz != nullptr);
    REQUIRE(gzwrite(gz, content.data(), static_cast<unsigned>(content.size())) ==
            static_cast<int>(content.size()));
    gzclose(gz);
    return path;
}

}  // namespace

TEST_CASE("tokenize") {
    SECTION("lowercase alnum split") {
        REQUIRE(tokenize("The stock market crashed today.") ==
                std::vector<std::string>{"the", "stock", "market", "crashed", "today"});
    }
    SECTION("words starting with http are dropped whole") {
        REQUIRE(tokenize("http://x.co hello") == std::vector<std::string>{"hello"});
        REQUIRE(tokenize("see HTTPS://a.b/c?q=1 now") ==
                std::vector<std::string>{"see", "now"});
    }
    SECTION("empty input") { REQUIRE(tokenize("").empty()); }
    SECTION("punctuation splits and digits survive") {
        REQUIRE(tokenize("can't-stop v2.0!") ==
                std::vector<std::string>{"can", "t", "stop", "v2", "0"});
    }
}

TEST_CASE("load_ag_news_csv") {
    SECTION("title and description concatenate; class shifts to 0-based") {
        const auto path = write_temp("ag.csv", "3,\"Oil up\",\"Crude prices rose\"\n");
        const auto corpus = load_ag_news_csv(path);
        REQUIRE(corpus.size() == 1);
        REQUIRE(corpus.documents[0].text == "Oil up Crude prices rose");
        REQUIRE(corpus.documents[0].label == 2);
        REQUIRE(corpus.label_names ==
                std::vector<std::string>{"World", "Sports", "Business", "Sci/Tech"});
    }

    SECTION("quoted commas stay inside fields") {
        const auto path = write_temp("ag.csv", "1,\"A, B\",\"c \"\"quoted\"\" d\"\n");
        const auto corpus = load_ag_news_csv(path);
        REQUIRE(corpus.documents[0].text == "A, B c \"quoted\" d");
    }

    SECTION("class outside 1-4 errors with the row number") {
        const auto path =
            write_temp("ag.csv", "1,t,d\n5,bad,row\n");
        REQUIRE_THROWS_MATCHES(load_ag_news_csv(path), IoError,
                               Catch::Matchers::MessageMatches(
                                   Catch::Matchers::ContainsSubstring("row 2")));
    }

    SECTION("wrong field count errors with the row number") {
        const auto path = write_temp("ag.csv", "1,only-two\n");
        REQUIRE_THROWS_MATCHES(load_ag_news_csv(path), IoError,
                               Catch::Matchers::MessageMatches(
                                   Catch::Matchers::ContainsSubstring("row 1")));
    }

    SECTION("max_rows truncates in file order") {
        std::string content;
        for (int i = 0; i < 120; ++i) content += "2,t" + std::to_string(i) + ",d\n";
        const auto path = write_temp("ag.csv", content);
        const auto corpus = load_ag_news_csv(path, 100);
        REQUIRE(corpus.size() == 100);
        REQUIRE(corpus.documents[99].text == "t99 d");
    }

    SECTION("gzip input by filename suffix") {
        const auto path = write_temp_gz("ag.csv.gz", "4,Tech,Chips\n1,World,News\n");
        const auto corpus = load_ag_news_csv(path);
        REQUIRE(corpus.size() == 2);
        REQUIRE(corpus.documents[0].label == 3);
    }

    SECTION("missing file is an I/O error") {
        REQUIRE_THROWS_AS(load_ag_news_csv(temp_path("absent.csv")), IoError);
    }
}

TEST_CASE("load_mbti_csv") {
    SECTION("posts joined, labels frozen alphabetically") {
        const auto path = write_temp(
            "mbti.csv", "type,posts\nINTJ,\"post one|||post two\"\nENFP,\"hi\"\n");
        const auto corpus = load_mbti_csv(path);
        REQUIRE(corpus.size() == 2);
        REQUIRE(corpus.documents[0].text == "post one post two");
        // alphabetical freeze: ENFP < INTJ
        REQUIRE(corpus.label_names == std::vector<std::string>{"ENFP", "INTJ"});
        REQUIRE(corpus.documents[0].label == 1);
        REQUIRE(corpus.documents[1].label == 0);
    }

    SECTION("unknown type code errors with the row number") {
        const auto path = write_temp("mbti.csv", "type,posts\nABCD,\"x\"\n");
        REQUIRE_THROWS_MATCHES(load_mbti_csv(path), IoError,
                               Catch::Matchers::MessageMatches(
                                   Catch::Matchers::ContainsSubstring("row 2") &&
                                   Catch::Matchers::ContainsSubstring("ABCD")));
    }

    SECTION("missing header is rejected") {
        const auto path = write_temp("mbti.csv", "INTJ,\"x\"\n");
        REQUIRE_THROWS_AS(load_mbti_csv(path), IoError);
    }

    SECTION("empty posts field is accepted") {
        const auto path = write_temp("mbti.csv", "type,posts\nISTP,\"\"\n");
        const auto corpus = load_mbti_csv(path);
        REQUIRE(corpus.size() == 1);
        REQUIRE(corpus.documents[0].text.empty());
    }
}

TEST_CASE("build_vocabulary") {
    LabeledCorpus corpus;
    corpus.label_names = {"a", "b"};
    corpus.documents = {{"a a b", 0, 0}};

    SECTION("frequency order with PAD and UNK reserved") {
        const auto vocab = build_vocabulary(corpus, 4, 1);
        REQUIRE(vocab.size() == 4);
        REQUIRE(vocab.id_of("a") == 2);
        REQUIRE(vocab.id_of("b") == 3);
        REQUIRE(vocab.frequencies[2] == 2);
    }

    SECTION("min_count excludes rare tokens") {
        const auto vocab = build_vocabulary(corpus, 4, 2);
        REQUIRE(vocab.size() == 3);
        REQUIRE(vocab.id_of("b") == Vocabulary::kUnkId);
    }

    SECTION("ties break lexicographically") {
        LabeledCorpus tie;
        tie.label_names = {"a"};
        tie.documents = {{"y x", 0, 0}};
        const auto vocab = build_vocabulary(tie, 10, 1);
        REQUIRE(vocab.id_of("x") == 2);
        REQUIRE(vocab.id_of("y") == 3);
    }

    SECTION("max_size below 3 is a config error") {
        REQUIRE_THROWS_AS(build_vocabulary(corpus, 2, 1), ConfigError);
    }

    SECTION("round trip over all ids") {
        const auto vocab = build_vocabulary(corpus, 10, 1);
        for (std::uint32_t id = 2; id < vocab.size(); ++id)
            REQUIRE(vocab.id_of(vocab.id_to_token[id]) == id);
    }
}

TEST_CASE("encode") {
    LabeledCorpus corpus;
    corpus.label_names = {"x"};
    corpus.documents = {{"alpha beta gamma", 0, 0}};
    const auto vocab = build_vocabulary(corpus, 10, 1);

    SECTION("known tokens map to their ids") {
        const auto enc = encode({"alpha gamma", 0, 0}, vocab, 16);
        REQUIRE(enc.token_ids ==
                std::vector<std::uint32_t>{vocab.id_of("alpha"), vocab.id_of("gamma")});
    }

    SECTION("unknown tokens become UNK") {
        const auto enc = encode({"zeta eta", 0, 0}, vocab, 16);
        REQUIRE(enc.token_ids ==
                std::vector<std::uint32_t>{Vocabulary::kUnkId, Vocabulary::kUnkId});
    }

    SECTION("empty text becomes a single PAD") {
        const auto enc = encode({"", 0, 0}, vocab, 16);
        REQUIRE(enc.token_ids == std::vector<std::uint32_t>{Vocabulary::kPadId});
    }

    SECTION("truncation at max_len") {
        const auto enc = encode({"alpha beta gamma", 0, 0}, vocab, 2);
        REQUIRE(enc.token_ids.size() == 2);
    }

    SECTION("never emits an id beyond the vocabulary") {
        const auto enc = encode({"alpha q77 beta zz", 0, 0}, vocab, 16);
        REQUIRE(!enc.token_ids.empty());
        for (auto id : enc.token_ids) REQUIRE(id < vocab.size());
    }
}

TEST_CASE("stratified_split") {
    LabeledCorpus corpus;
    corpus.label_names = {"c0", "c1", "c2", "c3"};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 100; ++i)
            corpus.documents.push_back(
                {"doc " + std::to_string(c) + " " + std::to_string(i), c,
                 corpus.documents.size()});

    SECTION("80/20 per class") {
        SeededRng rng(1);
        const auto [train, test] = stratified_split(corpus, 0.2, rng);
        REQUIRE(train.size() == 320);
        REQUIRE(test.size() == 80);
        for (int c = 0; c < 4; ++c) {
            std::size_t tr = 0, te = 0;
            for (const auto& d : train.documents) tr += d.label == c;
            for (const auto& d : test.documents) te += d.label == c;
            REQUIRE(tr == 80);
            REQUIRE(te == 20);
        }
    }

    SECTION("same seed reproduces the split") {
        SeededRng r1(9), r2(9);
        const auto [tr1, te1] = stratified_split(corpus, 0.3, r1);
        const auto [tr2, te2] = stratified_split(corpus, 0.3, r2);
        REQUIRE(tr1.size() == tr2.size());
        for (std::size_t i = 0; i < tr1.size(); ++i)
            REQUIRE(tr1.documents[i].text == tr2.documents[i].text);
    }

    SECTION("union preserved and sides disjoint") {
        SeededRng rng(4);
        const auto [train, test] = stratified_split(corpus, 0.5, rng);
        REQUIRE(train.size() + test.size() == corpus.size());
        std::set<std::string> seen;
        for (const auto& d : train.documents) seen.insert(d.text);
        for (const auto& d : test.documents) REQUIRE(seen.count(d.text) == 0);
    }

    SECTION("singleton class errors naming the class") {
        LabeledCorpus bad;
        bad.label_names = {"ok", "lonely"};
        bad.documents = {{"a", 0, 0}, {"b", 0, 1}, {"c", 1, 2}};
        SeededRng rng(1);
        REQUIRE_THROWS_MATCHES(stratified_split(bad, 0.5, rng), ConfigError,
                               Catch::Matchers::MessageMatches(
                                   Catch::Matchers::ContainsSubstring("lonely")));
    }

    SECTION("fraction bounds") {
        SeededRng rng(1);
        REQUIRE_THROWS_AS(stratified_split(corpus, 0.0, rng), ConfigError);
        REQUIRE_THROWS_AS(stratified_split(corpus, 1.0, rng), ConfigError);
    }
}

TEST_CASE("sample_triplets") {
    SECTION("all triplets satisfy the label constraints") {
        const std::vector<int> labels{0, 0, 1, 1};
        SeededRng rng(2);
        const auto triplets = sample_triplets(labels, 8, rng);
        REQUIRE(triplets.size() == 8);
        for (const auto& t : triplets) {
            REQUIRE(labels[t.anchor] == labels[t.positive]);
            REQUIRE(labels[t.anchor] != labels[t.negative]);
            REQUIRE(t.anchor != t.positive);
        }
    }

    SECTION("all-singleton classes error") {
        SeededRng rng(2);
        REQUIRE_THROWS_AS(sample_triplets({0, 1}, 4, rng), ConfigError);
    }

    SECTION("single class errors") {
        SeededRng rng(2);
        REQUIRE_THROWS_AS(sample_triplets({0, 0, 0}, 4, rng), ConfigError);
    }

    SECTION("same seed gives the same triplets") {
        const std::vector<int> labels{0, 0, 0, 1, 1, 2, 2, 2};
        SeededRng r1(77), r2(77);
        const auto a = sample_triplets(labels, 32, r1);
        const auto b = sample_triplets(labels, 32, r2);
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].anchor == b[i].anchor);
            REQUIRE(a[i].positive == b[i].positive);
            REQUIRE(a[i].negative == b[i].negative);
        }
    }

    SECTION("property: random label vectors never yield an invalid triplet") {
        SeededRng rng(123);
        for (int iter = 0; iter < 50; ++iter) {
            const std::size_t n = 4 + rng.next_index(40);
            const int num_classes = 2 + static_cast<int>(rng.next_index(5));
            std::vector<int> labels(n);
            for (auto& l : labels) l = static_cast<int>(rng.next_index(num_classes));
            bool any_pair = false;
            std::vector<int> counts(num_classes, 0);
            for (int l : labels) ++counts[l];
            int present = 0;
            for (int c : counts) {
                present += c > 0;
                any_pair |= c >= 2;
            }
            if (present < 2 || !any_pair) continue;
            for (const auto& t : sample_triplets(labels, 64, rng)) {
                REQUIRE(labels[t.anchor] == labels[t.positive]);
                REQUIRE(labels[t.anchor] != labels[t.negative]);
                REQUIRE(t.anchor != t.positive);
            }
        }
    }
}

TEST_CASE("subsample") {
    LabeledCorpus corpus;
    corpus.label_names = {"a", "b"};
    // 10 of class a, then 10 of class b
    for (int i = 0; i < 10; ++i) corpus.documents.push_back({"a" + std::to_string(i), 0,
                                                             corpus.documents.size()});
    for (int i = 0; i < 10; ++i) corpus.documents.push_back({"b" + std::to_string(i), 1,
                                                             corpus.documents.size()});

    SECTION("file-order prefix") {
        const auto sub = subsample(corpus, 12, false);
        REQUIRE(sub.size() == 12);
        std::size_t a_count = 0;
        for (const auto& d : sub.documents) a_count += d.label == 0;
        REQUIRE(a_count == 10);
    }

    SECTION("balanced prefix") {
        const auto sub = subsample(corpus, 12, true);
        REQUIRE(sub.size() == 12);
        std::size_t a_count = 0;
        for (const auto& d : sub.documents) a_count += d.label == 0;
        REQUIRE(a_count == 6);
    }
}
