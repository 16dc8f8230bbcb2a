#include <cmath>
#include <random>

#include <doctest.h>

#include "dcqa/head.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcqa;

namespace {

Tensor vec(std::vector<double> v) {
    const int64_t n = static_cast<int64_t>(v.size());
    return Tensor({n}, std::move(v));
}

struct Draw {
    Tensor s, e;
    int64_t cb, ce, max_len;
};

Draw random_draw(std::mt19937_64& rng) {
    std::uniform_int_distribution<int64_t> pick_L(3, 16);
    const int64_t L = pick_L(rng);
    std::uniform_int_distribution<int64_t> pick_cb(1, L - 1);
    const int64_t cb = pick_cb(rng);
    std::uniform_int_distribution<int64_t> pick_ce(cb + 1, L);
    const int64_t ce = pick_ce(rng);
    std::uniform_int_distribution<int64_t> pick_mal(1, L);
    Draw d;
    d.s = vec(oracle::random_vec(rng, static_cast<size_t>(L), -2.0, 2.0));
    d.e = vec(oracle::random_vec(rng, static_cast<size_t>(L), -2.0, 2.0));
    d.cb = cb;
    d.ce = ce;
    d.max_len = pick_mal(rng);
    return d;
}

}  // namespace

TEST_SUITE("head") {
    TEST_CASE("decode matches the exhaustive scan oracle: 600 draws, three taus") {
        std::mt19937_64 rng(41);
        int checked = 0;
        for (int it = 0; it < 200; ++it) {
            const Draw d = random_draw(rng);
            for (double tau : {-1.0, 0.0, 1.0}) {
                const auto got = decode_span(d.s, d.e, d.cb, d.ce, d.max_len, tau);
                const auto want =
                    oracle::decode_scan(d.s.data, d.e.data, d.cb, d.ce, d.max_len, tau);
                REQUIRE(got.start_idx == want.start);
                REQUIRE(got.end_idx == want.end);
                REQUIRE(got.is_no_answer == want.no_answer);
                REQUIRE(got.score == doctest::Approx(want.score).epsilon(1e-12));
                if (!got.is_no_answer) {
                    REQUIRE(got.end_idx - got.start_idx < d.max_len);
                    REQUIRE(got.start_idx >= d.cb);
                    REQUIRE(got.end_idx < d.ce);
                }
                ++checked;
            }
        }
        CHECK(checked == 600);
    }

    TEST_CASE("ties resolve to the first pair in scan order") {
        // All context pairs score 1.0 + 1.0; null scores 0. With tau = 0 the
        // best span wins and the first pair scanned is kept.
        Tensor s = vec({0.0, 1.0, 1.0, 1.0});
        Tensor e = vec({0.0, 1.0, 1.0, 1.0});
        const auto pred = decode_span(s, e, 1, 4, 4, 0.0);
        CHECK(!pred.is_no_answer);
        CHECK(pred.start_idx == 1);
        CHECK(pred.end_idx == 1);

        // Two distinct pairs tie at the top: (1,2) scanned before (2,3).
        Tensor s2 = vec({0.0, 2.0, 2.0, -9.0});
        Tensor e2 = vec({0.0, -9.0, 3.0, 3.0});
        const auto pred2 = decode_span(s2, e2, 1, 4, 4, 0.0);
        CHECK(pred2.start_idx == 1);
        CHECK(pred2.end_idx == 2);
    }

    TEST_CASE("null decision sits exactly on the tau threshold") {
        Tensor s = vec({1.0, 0.5, 0.0});
        Tensor e = vec({1.0, 0.5, 0.0});
        // best span = (1,1) with 1.0; null = 2.0.
        CHECK(decode_span(s, e, 1, 3, 3, 1.0).is_no_answer);   // 2 >= 1 + 1
        CHECK(!decode_span(s, e, 1, 3, 3, 1.0 + 1e-9).is_no_answer);
        CHECK(decode_span(s, e, 1, 3, 3, -5.0).is_no_answer);
    }

    TEST_CASE("decoding is invariant to constant logit shifts") {
        std::mt19937_64 rng(42);
        for (int it = 0; it < 100; ++it) {
            const Draw d = random_draw(rng);
            const double tau = (it % 3 - 1) * 0.5;
            const auto base = decode_span(d.s, d.e, d.cb, d.ce, d.max_len, tau);
            for (double c : {-3.0, 0.25, 10.0}) {
                Tensor s = d.s, e = d.e;
                for (auto& v : s.data) v += c;
                for (auto& v : e.data) v += c;
                const auto moved = decode_span(s, e, d.cb, d.ce, d.max_len, tau);
                REQUIRE(moved.start_idx == base.start_idx);
                REQUIRE(moved.end_idx == base.end_idx);
                REQUIRE(moved.is_no_answer == base.is_no_answer);
                REQUIRE(moved.score == doctest::Approx(base.score + 2 * c).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("raising the chosen start logit never changes the selection") {
        std::mt19937_64 rng(43);
        int exercised = 0;
        while (exercised < 100) {
            const Draw d = random_draw(rng);
            const auto base = decode_span(d.s, d.e, d.cb, d.ce, d.max_len, 0.0);
            if (base.is_no_answer) continue;
            Tensor s = d.s;
            s.data[static_cast<size_t>(base.start_idx)] += 0.9;
            const auto boosted = decode_span(s, d.e, d.cb, d.ce, d.max_len, 0.0);
            REQUIRE(!boosted.is_no_answer);
            REQUIRE(boosted.start_idx == base.start_idx);
            REQUIRE(boosted.end_idx == base.end_idx);
            ++exercised;
        }
    }

    TEST_CASE("answer probability matches the direct softmax-product oracle") {
        std::mt19937_64 rng(44);
        for (int it = 0; it < 200; ++it) {
            const int64_t L = 4 + static_cast<int64_t>(rng() % 8);
            Tensor s = vec(oracle::random_vec(rng, static_cast<size_t>(L), -2.0, 2.0));
            Tensor e = vec(oracle::random_vec(rng, static_cast<size_t>(L), -2.0, 2.0));
            Tensor real = Tensor::full({L}, 1.0);
            for (int64_t i = 1; i < L; ++i) real.data[i] = (rng() % 4 == 0) ? 0.0 : 1.0;

            std::vector<int64_t> reals;
            for (int64_t i = 0; i < L; ++i) {
                if (real.data[i] != 0.0) reals.push_back(i);
            }
            SpanPrediction pred;
            pred.start_idx = reals[rng() % reals.size()];
            pred.end_idx = reals[rng() % reals.size()];
            const double got = answer_probability(s, e, real, pred);
            const double want =
                oracle::span_probability(s.data, e.data, real.data, pred.start_idx, pred.end_idx);
            REQUIRE(got == doctest::Approx(want).epsilon(1e-9));
            REQUIRE(got > 0.0);
            REQUIRE(got <= 1.0);
        }
    }

    TEST_CASE("probabilities over all real pairs sum to one") {
        std::mt19937_64 rng(45);
        const int64_t L = 7;
        Tensor s = vec(oracle::random_vec(rng, L, -3.0, 3.0));
        Tensor e = vec(oracle::random_vec(rng, L, -3.0, 3.0));
        Tensor real({7}, {1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0});
        double total = 0.0;
        for (int64_t i = 0; i < L; ++i) {
            for (int64_t j = 0; j < L; ++j) {
                if (real.data[i] == 0.0 || real.data[j] == 0.0) continue;
                SpanPrediction pred;
                pred.start_idx = i;
                pred.end_idx = j;
                total += answer_probability(s, e, real, pred);
            }
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("answer probability rejects spans at padded positions") {
        Tensor s = vec({0.0, 1.0, 2.0});
        Tensor e = vec({0.0, 1.0, 2.0});
        Tensor real({3}, {1.0, 1.0, 0.0});
        SpanPrediction pred;
        pred.start_idx = 2;
        pred.end_idx = 2;
        CHECK_THROWS_AS(answer_probability(s, e, real, pred), ValidationError);
        Tensor short_mask({2}, {1.0, 1.0});
        pred.start_idx = 0;
        pred.end_idx = 0;
        CHECK_THROWS_AS(answer_probability(s, e, short_mask, pred), ValidationError);
    }

    TEST_CASE("decode rejects malformed inputs") {
        Tensor s = vec({0.0, 1.0, 2.0, 3.0});
        Tensor e4 = vec({0.0, 1.0, 2.0, 3.0});
        Tensor e3 = vec({0.0, 1.0, 2.0});
        CHECK_THROWS_AS(decode_span(s, e3, 1, 3, 4, 0.0), ValidationError);
        CHECK_THROWS_AS(decode_span(s, e4, 2, 2, 4, 0.0), ValidationError);  // empty range
        CHECK_THROWS_AS(decode_span(s, e4, 3, 2, 4, 0.0), ValidationError);  // inverted
        CHECK_THROWS_AS(decode_span(s, e4, 0, 3, 4, 0.0), ValidationError);  // includes null slot
        CHECK_THROWS_AS(decode_span(s, e4, 1, 5, 4, 0.0), ValidationError);  // past the end
        CHECK_THROWS_AS(decode_span(s, e4, 1, 3, 0, 0.0), ValidationError);  // max_answer_len
        Tensor mat = Tensor::zeros({2, 2});
        CHECK_THROWS_AS(decode_span(mat, mat, 1, 2, 4, 0.0), ValidationError);
    }

    TEST_CASE("head produces [L] logits with pads pushed below any real score") {
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        ParamStore ps(7);
        OutputHead head(ps, cfg);

        const auto ex = testutil::make_example(2, 4, 11);
        const int64_t L = ex.length() + 3;  // three pad slots
        Tensor real = Tensor::zeros({L});
        for (int64_t i = 0; i < ex.length(); ++i) real.data[i] = ex.m_real.data[i];

        std::mt19937_64 rng(12);
        Tensor sin = Tensor::zeros({L, cfg.d_model});
        sin.data = oracle::random_vec(rng, sin.data.size(), -1.0, 1.0);
        const auto logits = head.apply(wrap(sin), real);

        REQUIRE(logits.start->value.rank() == 1);
        REQUIRE(logits.start->value.dim(0) == L);
        REQUIRE(logits.end->value.dim(0) == L);
        for (int64_t i = 0; i < L; ++i) {
            if (real.data[i] == 0.0) {
                CHECK(logits.start->value.data[i] <= -1e8);
                CHECK(logits.end->value.data[i] <= -1e8);
            } else {
                CHECK(std::abs(logits.start->value.data[i]) < 1e6);
                CHECK(std::abs(logits.end->value.data[i]) < 1e6);
            }
        }
    }

    TEST_CASE("the no-LSTM ablation swaps the end path parameters and output") {
        RunConfig with = testutil::tiny_config();
        with.resolve();
        ParamStore ps_lstm(3);
        OutputHead lstm_head(ps_lstm, with);
        CHECK(ps_lstm.has("head.end.lstm.wx"));
        CHECK(!ps_lstm.has("head.end.dense.w"));

        RunConfig without = with;
        without.no_lstm = true;
        ParamStore ps_dense(3);
        OutputHead dense_head(ps_dense, without);
        CHECK(ps_dense.has("head.end.dense.w"));
        CHECK(!ps_dense.has("head.end.lstm.wx"));

        const auto ex = testutil::make_example(2, 4, 13);
        std::mt19937_64 rng(14);
        Tensor sin = Tensor::zeros({ex.length(), with.d_model});
        sin.data = oracle::random_vec(rng, sin.data.size(), -1.0, 1.0);
        const auto a = lstm_head.apply(wrap(sin), ex.m_real);
        const auto b = dense_head.apply(wrap(sin), ex.m_real);
        CHECK(a.end->value.all_finite());
        CHECK(b.end->value.all_finite());
        double diff = 0.0;
        for (int64_t i = 0; i < ex.length(); ++i) {
            diff += std::abs(a.end->value.data[i] - b.end->value.data[i]);
        }
        CHECK(diff > 1e-8);  // architecturally different end paths
    }

    TEST_CASE("end path consumes both preprocessed streams") {
        // The end logits must react to a change that only affects the start
        // stream input when the joint concatenation is wired correctly: both
        // pre-processed sequences feed the LSTM, so perturbing the shared
        // input moves both.
        RunConfig cfg = testutil::tiny_config();
        cfg.resolve();
        ParamStore ps(21);
        OutputHead head(ps, cfg);
        const auto ex = testutil::make_example(2, 3, 15);
        std::mt19937_64 rng(16);
        Tensor sin = Tensor::zeros({ex.length(), cfg.d_model});
        sin.data = oracle::random_vec(rng, sin.data.size(), -1.0, 1.0);
        auto [pre_s, pre_e] = head.preprocess(wrap(sin), ex.m_real);
        CHECK(pre_s->value.dim(1) == cfg.d_model);
        CHECK(pre_e->value.dim(1) == cfg.d_model);
        // distinct parameter sets -> the two streams diverge
        double diff = 0.0;
        for (size_t i = 0; i < pre_s->value.data.size(); ++i) {
            diff += std::abs(pre_s->value.data[i] - pre_e->value.data[i]);
        }
        CHECK(diff > 1e-8);
    }
}
