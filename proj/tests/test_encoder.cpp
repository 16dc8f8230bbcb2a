#include <cmath>
#include <random>

#include <doctest.h>

#include "dcqa/encoder.hpp"
#include "dcqa/params.hpp"
#include "dcqa/tokenizer.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcqa;

TEST_SUITE("params") {
    TEST_CASE("same seed gives bit-identical stores") {
        ParamStore a(42), b(42);
        auto pa = a.uniform("w", {4, 5}, 4);
        auto pb = b.uniform("w", {4, 5}, 4);
        REQUIRE(pa->value.data == pb->value.data);
    }

    TEST_CASE("different seeds differ") {
        ParamStore a(1), b(2);
        CHECK(a.uniform("w", {4, 5}, 4)->value.data != b.uniform("w", {4, 5}, 4)->value.data);
    }

    TEST_CASE("uniform respects the fan-in bound") {
        ParamStore ps(7);
        auto p = ps.uniform("w", {64, 64}, 16);
        const double bound = 1.0 / std::sqrt(16.0);
        for (double v : p->value.data) {
            CHECK(v >= -bound);
            CHECK(v <= bound);
        }
        // values actually spread out, not collapsed
        double lo = 1e9, hi = -1e9;
        for (double v : p->value.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(hi - lo > bound);
    }

    TEST_CASE("zeros and ones") {
        ParamStore ps(0);
        for (double v : ps.zeros("z", {3})->value.data) CHECK(v == 0.0);
        for (double v : ps.ones("o", {3})->value.data) CHECK(v == 1.0);
    }

    TEST_CASE("duplicate and empty names rejected") {
        ParamStore ps(0);
        ps.zeros("w", {2});
        CHECK_THROWS_AS(ps.zeros("w", {2}), ValidationError);
        CHECK_THROWS_AS(ps.zeros("", {2}), ValidationError);
    }

    TEST_CASE("creation order is preserved and lookups work") {
        ParamStore ps(0);
        ps.zeros("b", {1});
        ps.zeros("a", {2});
        ps.zeros("c", {3});
        REQUIRE(ps.all().size() == 3);
        CHECK(ps.all()[0]->name == "b");
        CHECK(ps.all()[1]->name == "a");
        CHECK(ps.all()[2]->name == "c");
        CHECK(ps.get("a")->value.numel() == 2);
        CHECK(ps.has("c"));
        CHECK(!ps.has("d"));
        CHECK(ps.total_elements() == 6);
        CHECK_THROWS_AS(ps.get("missing"), ValidationError);
    }
}

TEST_SUITE("tokenizer") {
    TEST_CASE("reserved ids and bucket range") {
        Tokenizer tok(64);
        CHECK(Tokenizer::kPad == 0);
        CHECK(Tokenizer::kUnk == 1);
        CHECK(Tokenizer::kCls == 2);
        CHECK(Tokenizer::kSep == 3);
        for (const char* w : {"rivers", "sea", "x", "never-seen-before"}) {
            const int64_t id = tok.token_id(w);
            CHECK(id >= 4);
            CHECK(id < 64);
        }
    }

    TEST_CASE("hashing is case-insensitive and deterministic") {
        Tokenizer tok(4096);
        CHECK(tok.token_id("Paris") == tok.token_id("paris"));
        CHECK(tok.token_id("PARIS") == tok.token_id("paris"));
        CHECK(tok.token_id("paris") == Tokenizer(4096).token_id("paris"));
    }

    TEST_CASE("vocab_size must leave room for hash buckets") {
        CHECK_THROWS_AS(Tokenizer(4), ValidationError);
        CHECK_THROWS_AS(Tokenizer(0), ValidationError);
        CHECK_NOTHROW(Tokenizer(5));
    }

    TEST_CASE("tokenize_with_offsets records exact character ranges") {
        const std::string text = "  Rivers run  to the sea ";
        const auto toks = tokenize_with_offsets(text);
        REQUIRE(toks.size() == 5);
        CHECK(toks[0].text == "Rivers");
        CHECK(toks[0].begin == 2);
        CHECK(toks[0].end == 8);
        CHECK(toks[4].text == "sea");
        for (const auto& t : toks) {
            CHECK(text.substr(static_cast<size_t>(t.begin),
                              static_cast<size_t>(t.end - t.begin)) == t.text);
        }
    }

    TEST_CASE("split_words matches offset tokenization") {
        const auto words = split_words("a  b\tc\nd");
        REQUIRE(words.size() == 4);
        CHECK(words[0] == "a");
        CHECK(words[3] == "d");
        CHECK(split_words("   ").empty());
        CHECK(split_words("").empty());
    }

    TEST_CASE("to_lower is ascii-only") {
        CHECK(to_lower("AbC xYz") == "abc xyz");
    }
}

TEST_SUITE("config") {
    TEST_CASE("defaults derive from d_model") {
        RunConfig cfg;
        cfg.resolve();
        CHECK(cfg.d_ff == 4 * cfg.d_model);
        CHECK(cfg.d_k == cfg.d_model);
        CHECK(cfg.lstm_hidden == cfg.d_model);
        CHECK(cfg.merge_c_mid == cfg.d_model + cfg.d_model / 2);
        REQUIRE(cfg.local_conv_spec.size() == 4);
        for (const auto& l : cfg.local_conv_spec) {
            CHECK(l.c_in == cfg.d_model);
            CHECK(l.c_out == cfg.d_model);
            CHECK(l.kernel == 3);
        }
    }

    TEST_CASE("validation names the offending field") {
        auto expect_reject = [](void (*mutate)(RunConfig&), const char* needle) {
            RunConfig cfg = testutil::tiny_config();
            mutate(cfg);
            try {
                cfg.resolve();
                FAIL_CHECK("expected rejection for ", needle);
            } catch (const ValidationError& e) {
                CHECK(std::string(e.what()).find(needle) != std::string::npos);
            }
        };
        expect_reject([](RunConfig& c) { c.d_model = 0; }, "d_model");
        expect_reject([](RunConfig& c) { c.n_heads = 3; }, "n_heads");  // must divide d_model
        expect_reject([](RunConfig& c) { c.vocab_size = 4; }, "vocab_size");
        expect_reject([](RunConfig& c) { c.merge_c_mid = 8; }, "merge_c_mid");   // == d_model
        expect_reject([](RunConfig& c) { c.merge_c_mid = 16; }, "merge_c_mid");  // == 2*d_model
        expect_reject([](RunConfig& c) { c.merge_kernel = 2; }, "merge_kernel");
        expect_reject([](RunConfig& c) { c.max_seq_len = 64; }, "max_seq_len");  // > max_len
        expect_reject([](RunConfig& c) { c.learning_rate = -1.0; }, "learning_rate");
        expect_reject([](RunConfig& c) { c.skip_mode = "banana"; }, "skip_mode");
        expect_reject([](RunConfig& c) { c.batch_size = 0; }, "batch_size");
        expect_reject([](RunConfig& c) { c.grad_accum_steps = 0; }, "grad_accum_steps");
        expect_reject([](RunConfig& c) { c.max_answer_len = 0; }, "max_answer_len");
        expect_reject(
            [](RunConfig& c) {
                // chain breaks between layers 1 and 2 (4 != 8)
                c.local_conv_spec = {{8, 8, 3}, {8, 4, 3}, {8, 8, 3}, {8, 8, 3}};
            },
            "local_conv_spec");
        expect_reject(
            [](RunConfig& c) {
                c.local_conv_spec = {{8, 8, 4}, {8, 8, 3}, {8, 8, 3}, {8, 8, 3}};  // even kernel
            },
            "local_conv_spec");
        expect_reject(
            [](RunConfig& c) { c.local_conv_spec = {{8, 8, 3}, {8, 8, 3}}; },  // wrong depth
            "local_conv_spec");
    }

    TEST_CASE("merge_c_mid strictly between d and 2d is accepted") {
        RunConfig cfg = testutil::tiny_config();
        cfg.merge_c_mid = 9;
        CHECK_NOTHROW(cfg.resolve());
        cfg = testutil::tiny_config();
        cfg.merge_c_mid = 15;
        CHECK_NOTHROW(cfg.resolve());
    }

    TEST_CASE("json round trip preserves every field") {
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        const RunConfig back = RunConfig::from_json(cfg.to_json());
        CHECK(back.to_json() == cfg.to_json());
    }

    TEST_CASE("unknown keys are rejected") {
        nlohmann::json j = testutil::tiny_config().to_json();
        j["typo_field"] = 1;
        CHECK_THROWS_AS(RunConfig::from_json(j), ValidationError);
    }

    TEST_CASE("lr of exactly zero is allowed") {
        RunConfig cfg = testutil::tiny_config();
        cfg.learning_rate = 0.0;
        CHECK_NOTHROW(cfg.resolve());
    }

    TEST_CASE("skip mode string conversions") {
        for (const char* s : {"none", "simple", "transformer", "highway"}) {
            CHECK(skip_mode_to_string(skip_mode_from_string(s)) == s);
        }
        CHECK_THROWS_AS(skip_mode_from_string("nope"), ValidationError);
    }
}

TEST_SUITE("encoder") {
    TEST_CASE("encode preserves [L, d_model] for every layer count") {
        for (int64_t n_layers : {0, 1, 3}) {
            RunConfig cfg = testutil::tiny_config();
            cfg.n_layers = n_layers;
            cfg.resolve();
            ParamStore ps(cfg.seed);
            Encoder enc(cfg, ps);
            const auto ex = testutil::make_example(3, 5, 11);
            auto out = enc.encode(ex.token_ids, ex.m_real);
            REQUIRE(out->value.rank() == 2);
            CHECK(out->value.dim(0) == ex.length());
            CHECK(out->value.dim(1) == cfg.d_model);
            CHECK(out->value.all_finite());
        }
    }

    TEST_CASE("zero layers reduce encode to the embedding sum") {
        RunConfig cfg = testutil::tiny_config();
        cfg.n_layers = 0;
        cfg.resolve();
        ParamStore ps(cfg.seed);
        Encoder enc(cfg, ps);
        const auto ex = testutil::make_example(2, 4, 5);
        auto a = enc.encode(ex.token_ids, ex.m_real);
        auto b = enc.embed(ex.token_ids);
        CHECK(a->value.data == b->value.data);
    }

    TEST_CASE("padding isolation: pad content never leaks into real positions") {
        RunConfig cfg = testutil::tiny_config();
        cfg.n_layers = 2;
        cfg.resolve();
        ParamStore ps(cfg.seed);
        Encoder enc(cfg, ps);

        auto ex = testutil::make_example(2, 4, 7);
        // append two pad slots
        std::vector<int64_t> ids = ex.token_ids;
        ids.push_back(Tokenizer::kPad);
        ids.push_back(Tokenizer::kPad);
        Tensor real = Tensor::zeros({ex.length() + 2});
        for (int64_t i = 0; i < ex.length(); ++i) real.data[static_cast<size_t>(i)] = 1.0;

        auto base = enc.encode(ids, real);
        std::vector<int64_t> ids2 = ids;
        ids2[ids.size() - 1] = 17;  // arbitrary real token id in a padded slot
        ids2[ids.size() - 2] = 29;
        auto poked = enc.encode(ids2, real);
        for (int64_t i = 0; i < ex.length(); ++i) {
            for (int64_t j = 0; j < cfg.d_model; ++j) {
                CHECK(base->value.at({i, j}) == poked->value.at({i, j}));
            }
        }
    }

    TEST_CASE("position embeddings distinguish repeated tokens; disabling them stops that") {
        const std::vector<int64_t> ids = {2, 9, 9, 3};
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        {
            ParamStore ps(cfg.seed);
            Encoder enc(cfg, ps);
            auto e = enc.embed(ids);
            bool differ = false;
            for (int64_t j = 0; j < cfg.d_model; ++j) {
                if (e->value.at({1, j}) != e->value.at({2, j})) differ = true;
            }
            CHECK(differ);
        }
        {
            RunConfig flat = cfg;
            flat.position_embeddings = false;
            ParamStore ps(flat.seed);
            Encoder enc(flat, ps);
            auto e = enc.embed(ids);
            for (int64_t j = 0; j < flat.d_model; ++j) {
                CHECK(e->value.at({1, j}) == e->value.at({2, j}));
            }
        }
    }

    TEST_CASE("segment embeddings only when enabled") {
        RunConfig cfg = testutil::tiny_config();
        cfg.segment_embeddings = true;
        cfg.resolve();
        ParamStore ps(cfg.seed);
        Encoder enc(cfg, ps);
        const std::vector<int64_t> ids = {2, 9, 3, 9, 3};
        const std::vector<int64_t> segs = {0, 0, 0, 1, 1};
        auto with = enc.embed(ids, &segs);
        auto without = enc.embed(ids);  // all-zero segments
        bool differ = false;
        for (size_t i = 0; i < with->value.data.size(); ++i) {
            if (with->value.data[i] != without->value.data[i]) differ = true;
        }
        CHECK(differ);

        const std::vector<int64_t> bad = {0, 0, 0, 2, 1};
        CHECK_THROWS_AS(enc.embed(ids, &bad), ValidationError);

        RunConfig off = testutil::tiny_config();
        off.resolve();
        ParamStore ps2(off.seed);
        Encoder enc2(off, ps2);
        CHECK_THROWS_AS(enc2.embed(ids, &segs), ValidationError);
    }

    TEST_CASE("overlong and degenerate inputs rejected") {
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        ParamStore ps(cfg.seed);
        Encoder enc(cfg, ps);
        std::vector<int64_t> too_long(static_cast<size_t>(cfg.max_len + 1), 5);
        CHECK_THROWS_AS(enc.embed(too_long), ValidationError);
        CHECK_THROWS_AS(enc.embed({}), ValidationError);
        CHECK_THROWS_AS(enc.embed({5, 64}), ValidationError);  // id == vocab_size
        CHECK_THROWS_AS(enc.embed({5, -1}), ValidationError);

        // all-padding mask rejected
        auto e = enc.embed({5, 6});
        CHECK_THROWS_AS(enc.encode_embedded(e, Tensor::zeros({2})), ValidationError);
    }

    TEST_CASE("encode is deterministic and seed-faithful") {
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        const auto ex = testutil::make_example(3, 4, 9);
        ParamStore a(cfg.seed);
        Encoder ea(cfg, a);
        ParamStore b(cfg.seed);
        Encoder eb(cfg, b);
        CHECK(ea.encode(ex.token_ids, ex.m_real)->value.data ==
              eb.encode(ex.token_ids, ex.m_real)->value.data);
        CHECK(ea.encode(ex.token_ids, ex.m_real)->value.data ==
              ea.encode(ex.token_ids, ex.m_real)->value.data);
    }

    TEST_CASE("transformer block with a single permitted key is finite and well-formed") {
        ParamStore ps(4);
        TransformerBlock blk(ps, "blk", 8, 2, 16);
        Tensor x = Tensor::zeros({3, 8});
        std::mt19937_64 rng(2);
        for (auto& v : x.data) v = oracle::random_vec(rng, 1)[0];
        Tensor mask({3}, {1.0, 0.0, 0.0});
        auto out = blk.apply(wrap(x), mask);
        CHECK(out->value.dim(0) == 3);
        CHECK(out->value.dim(1) == 8);
        CHECK(out->value.all_finite());
    }
}
