#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "model_oracles.hpp"
#include "otvq/data.hpp"
#include "otvq/models.hpp"
#include "test_support.hpp"

using namespace otvq;
using namespace otvq::models;
using otvq::testing::ModelSetup;

namespace {

Dense dense(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b) {
    return Dense{Tensor::parameter(Shape{in, out}, std::move(w)), Tensor::parameter(Shape{out}, std::move(b))};
}

// n_x=2 -> 3 -> M*n_z=2 encoder, mirrored decoder, all weights fixed.
EncoderDecoder fixed_net() {
    EncoderDecoder net = EncoderDecoder::zeros(2, 1, 2, {3});
    net.encoder = {dense(2, 3, {0.5, -1.0, 0.25, 1.5, 0.75, -0.5}, {0.1, 0.2, -0.3}),
                   dense(3, 2, {1.0, -0.5, 0.25, 0.5, -1.0, 2.0}, {0.05, -0.05})};
    net.decoder = {dense(2, 3, {0.3, -0.2, 0.9, -0.4, 0.6, 0.1}, {0.0, 0.5, -0.1}),
                   dense(3, 2, {1.2, 0.4, -0.7, 0.8, 0.2, -0.3}, {0.01, 0.02})};
    return net;
}

// Linear 1-D net passing the input through unchanged.
EncoderDecoder identity_net() {
    EncoderDecoder net = EncoderDecoder::zeros(1, 1, 1, {});
    net.encoder = {dense(1, 1, {1.0}, {0.0})};
    net.decoder = {dense(1, 1, {1.0}, {0.0})};
    return net;
}

data::Dataset tiny_dataset(std::vector<double> samples, std::size_t n_x) {
    data::Dataset d;
    d.name = "tiny";
    d.n_x = n_x;
    d.samples = std::move(samples);
    return d;
}

ModelConfig synthetic_config(Method method) {
    ModelConfig c;
    c.method = method;
    c.n_x = 2;
    c.K = 16;
    c.M = 1;
    c.n_z = 2;
    c.hidden = {32, 32};
    c.lr = 1e-3;
    c.seed = 3;
    return c;
}

std::vector<double> sq_mean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return {s / static_cast<double>(a.size())};
}

}  // namespace

TEST(EncodeDecode, ShapeContract) {
    auto net = EncoderDecoder::init(5, 3, 4, {7, 6}, 1);
    const Tensor z = net.encode(Tensor::constant(Shape{1, 5}, {1, 2, 3, 4, 5}));
    EXPECT_EQ(z.shape(), (Shape{1, 3, 4}));
    EXPECT_EQ(net.decode(z).shape(), (Shape{1, 5}));
    EXPECT_THROW(net.encode(Tensor::constant(Shape{1, 4}, {1, 2, 3, 4})), ShapeError);
    EXPECT_THROW(net.decode(Tensor::zeros(Shape{1, 3, 3})), ShapeError);
}

TEST(EncodeDecode, ZeroWeightsGiveZeros) {
    auto net = EncoderDecoder::zeros(3, 2, 2, {4});
    const Tensor z = net.encode(Tensor::constant(Shape{2, 3}, {1, -2, 3, 0.5, 7, -1}));
    for (double v : z.values()) EXPECT_EQ(v, 0.0);
    const Tensor x = net.decode(Tensor::constant(Shape{1, 2, 2}, {1, 2, 3, 4}));
    for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeDecode, MatchesHandMatrixArithmetic) {
    const auto net = fixed_net();
    // Hidden: relu((0.5*1 + 1.5*-2 + 0.1, -1*1 + 0.75*-2 + 0.2, 0.25*1 - 0.5*-2 - 0.3)) = (0, 0, 0.95)
    // Output: 0.95 * (-1.0, 2.0) + (0.05, -0.05) = (-0.9, 1.85)
    const Tensor z = net.encode(Tensor::constant(Shape{1, 2}, {1.0, -2.0}));
    EXPECT_NEAR(z[0], -0.9, 1e-15);
    EXPECT_NEAR(z[1], 1.85, 1e-15);

    std::mt19937_64 rng(4);
    const Tensor x = otvq::testing::random_tensor(rng, Shape{6, 2});
    const Tensor zz = net.encode(x);
    const Tensor xr = net.decode(zz);
    for (std::size_t b = 0; b < 6; ++b) {
        const auto ze = otvq::testing::plain_mlp(net.encoder, {x[2 * b], x[2 * b + 1]});
        const auto xe = otvq::testing::plain_mlp(net.decoder, ze);
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_NEAR(zz[2 * b + j], ze[j], 1e-14);
            EXPECT_NEAR(xr[2 * b + j], xe[j], 1e-14);
        }
    }
}

TEST(VqvaeLoss, PerfectAutoencoderOnCodewordsIsZero) {
    const auto net = identity_net();
    const auto cb = vq::Codebook::from_values(2, 1, 1, {0.5, -0.25}, {0.0, 0.0});
    const auto e = vqvae_loss(net, cb, Tensor::constant(Shape{3, 1}, {0.5, -0.25, 0.5}));
    EXPECT_EQ(e.parts, LossBreakdown{});
}

TEST(VqvaeLoss, ZeroBetaDropsCommitment) {
    const auto s = otvq::testing::tiny_setup(1);
    ObjectiveWeights w;
    w.beta = 0.0;
    const auto e = vqvae_loss(s.net, s.cb, s.x, w);
    EXPECT_GT(e.parts.vqvae_commit, 0.0);
    EXPECT_DOUBLE_EQ(e.parts.total, e.parts.recon + e.parts.vqvae_codebook);
}

TEST(VqvaeLoss, TinyNetMatchesHandEvaluation) {
    // n_x=2, n_z=1, M=1, K=2, linear encoder and decoder.
    EncoderDecoder net = EncoderDecoder::zeros(2, 1, 1, {});
    net.encoder = {dense(2, 1, {0.5, -0.25}, {0.1})};
    net.decoder = {dense(1, 2, {2.0, -1.0}, {0.0, 0.5})};
    const auto cb = vq::Codebook::from_values(2, 1, 1, {-0.5, 0.5}, {0.0, 0.0});
    const Tensor x = Tensor::constant(Shape{2, 2}, {1.0, 2.0, -1.0, 0.5});

    // z = (0.5 - 0.5 + 0.1, -0.5 - 0.125 + 0.1) = (0.1, -0.525); nearest atoms 0.5 and -0.5.
    const double z[2] = {0.1, -0.525};
    const double q[2] = {0.5, -0.5};
    std::vector<double> xhat, xv{1.0, 2.0, -1.0, 0.5};
    for (double qi : q) {
        xhat.push_back(2.0 * qi);
        xhat.push_back(-qi + 0.5);
    }
    const double recon = sq_mean(xhat, xv)[0];
    const double dz = ((z[0] - q[0]) * (z[0] - q[0]) + (z[1] - q[1]) * (z[1] - q[1])) / 2.0;

    const auto e = vqvae_loss(net, cb, x);
    EXPECT_NEAR(e.parts.recon, recon, 1e-14);
    EXPECT_NEAR(e.parts.vqvae_codebook, dz, 1e-14);
    EXPECT_NEAR(e.parts.vqvae_commit, dz, 1e-14);
    EXPECT_NEAR(e.parts.total, recon + 1.25 * dz, 1e-14);
    EXPECT_EQ(e.quantized.indices, (std::vector<std::size_t>{1, 0}));
}

TEST(VqwaeLoss, ZeroWeightsLeaveRecon) {
    auto s = otvq::testing::tiny_setup(2);
    s.weights.lambda = 0.0;
    s.weights.lambda_r = 0.0;
    const auto e = vqwae_loss(s.net, s.cb, s.phis, s.x, s.weights);
    EXPECT_EQ(e.parts.total, e.parts.recon);
}

TEST(VqwaeLoss, UniformBetaHasZeroKl) {
    auto s = otvq::testing::tiny_setup(3);
    s.cb.beta = Tensor::parameter(Shape{2, 3}, {0.4, 0.4, 0.4, -1, -1, -1});
    EXPECT_NEAR(vqwae_loss(s.net, s.cb, s.phis, s.x, s.weights).parts.kl_term, 0.0, 1e-15);
}

TEST(VqwaeLoss, TinyConfigurationSingleAtomClosedForm) {
    // With K=1 the semi-dual collapses to the mean cost (1/B) sum_i |z_i - c|^2,
    // independent of phi and eps.
    EncoderDecoder net = EncoderDecoder::zeros(2, 1, 1, {});
    net.encoder = {dense(2, 1, {0.5, -0.25}, {0.1})};
    net.decoder = {dense(1, 2, {2.0, -1.0}, {0.0, 0.5})};
    const auto cb = vq::Codebook::from_values(1, 1, 1, {0.3}, {1.7});
    const ot::DualPotentials phis{{{4.2}}};
    const Tensor x = Tensor::constant(Shape{2, 2}, {1.0, 2.0, -1.0, 0.5});
    ObjectiveWeights w;
    w.lambda = 0.1;
    w.lambda_r = 1.0;

    const double z[2] = {0.1, -0.525};
    const double ws = ((z[0] - 0.3) * (z[0] - 0.3) + (z[1] - 0.3) * (z[1] - 0.3)) / 2.0;
    const std::vector<double> xhat{0.6, 0.2, 0.6, 0.2};
    const double recon = sq_mean(xhat, {1.0, 2.0, -1.0, 0.5})[0];

    const auto e = vqwae_loss(net, cb, phis, x, w);
    EXPECT_NEAR(e.parts.ws_term, ws, 1e-14);
    EXPECT_NEAR(e.parts.kl_term, 0.0, 1e-15);
    EXPECT_NEAR(e.parts.recon, recon, 1e-14);
    EXPECT_NEAR(e.parts.total, recon + 0.1 * ws, 1e-14);
}

TEST(ModelGradients, VqwaeEveryGroupMatchesSurrogate) {
    const auto s = otvq::testing::tiny_setup(11);
    for (const auto& [name, group] : otvq::testing::parameter_groups(s)) {
        EXPECT_LT(otvq::testing::model_grad_error(s, group.first, group.second, Method::VqWae), 1e-4) << name;
    }
}

TEST(ModelGradients, VqvaeEveryGroupMatchesSurrogate) {
    const auto s = otvq::testing::tiny_setup(12);
    for (const auto& [name, group] : otvq::testing::parameter_groups(s)) {
        EXPECT_LT(otvq::testing::model_grad_error(s, group.first, group.second, Method::VqVae), 1e-4) << name;
    }
}

TEST(ModelGradients, PotentialsGetNoGradientFromVqwaeLoss) {
    const auto s = otvq::testing::tiny_setup(5);
    const auto e = vqwae_loss(s.net, s.cb, s.phis, s.x, s.weights);
    const auto g = backward(e.total);
    // Exactly the encoder/decoder tensors, atoms and beta.
    EXPECT_EQ(g.size(), s.net.parameters().size() + 2);
}

TEST(ModelGradients, AtomsOnlyReachedThroughWsTerm) {
    auto s = otvq::testing::tiny_setup(6);
    s.weights.lambda = 0.0;
    const auto g = backward(vqwae_loss(s.net, s.cb, s.phis, s.x, s.weights).total);
    for (double v : g.get(s.cb.atoms).values()) EXPECT_EQ(v, 0.0);
}

TEST(ModelGradients, DualAscentLeavesNetworkUntouched) {
    ModelConfig c = synthetic_config(Method::VqWae);
    c.lr = 0.0;
    TrainState s = init_state(c);
    const auto before = s.net.parameters();
    const auto atoms = otvq::testing::to_vec(s.codebook.atoms);
    auto d = data::gen_gaussian_mixture(8, 2, 8, 0.05, 1);
    train_step(s, data::batches(d, 32, 0, true)[0]);
    const auto after = s.net.parameters();
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(otvq::testing::to_vec(before[i]), otvq::testing::to_vec(after[i]));
    EXPECT_EQ(otvq::testing::to_vec(s.codebook.atoms), atoms);
    EXPECT_NE(s.phis, ot::DualPotentials::zeros(1, 16));
}

TEST(TrainStep, SameSeedIdenticalSequences) {
    for (Method m : {Method::VqVae, Method::VqWae}) {
        auto d = data::gen_gaussian_mixture(8, 2, 16, 0.05, 2);
        TrainState a = init_state(synthetic_config(m));
        TrainState b = init_state(synthetic_config(m));
        data::BatchStream sa(d, 32, 9, true), sb(d, 32, 9, true);
        for (int i = 0; i < 20; ++i) EXPECT_EQ(train_step(a, sa.next()), train_step(b, sb.next()));
        EXPECT_EQ(a.iteration, 20u);
    }
}

TEST(TrainStep, ZeroLearningRatesFreezeEverything) {
    ModelConfig c = synthetic_config(Method::VqWae);
    c.lr = 0.0;
    c.phi_lr = 0.0;
    TrainState s = init_state(c);
    auto d = data::gen_gaussian_mixture(8, 2, 4, 0.05, 2);
    const Tensor batch = data::batches(d, 32, 0, false)[0];
    const auto first = train_step(s, batch);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(train_step(s, batch), first);
}

TEST(TrainStep, NonFiniteLossAborts) {
    ModelConfig c = synthetic_config(Method::VqVae);
    TrainState s = init_state(c);
    s.net.decoder.back().b = Tensor::parameter(Shape{2}, {1e300, 0.0});
    auto d = data::gen_gaussian_mixture(8, 2, 4, 0.05, 2);
    EXPECT_THROW(train_step(s, data::batches(d, 32, 0, false)[0]), NumericError);
}

// Threshold from a pilot run: the 20-step smoothed recon after 200 steps
// fell to about 0.53 (vqvae) and 0.58 (vqwae) of its starting value.
TEST(TrainStep, TwoHundredStepsReduceRecon) {
    for (Method m : {Method::VqVae, Method::VqWae}) {
        auto d = data::gen_gaussian_mixture(8, 2, 64, 0.05, 1);
        TrainState s = init_state(synthetic_config(m));
        data::BatchStream stream(d, 32, 5, true);
        std::vector<double> recon;
        for (int i = 0; i < 200; ++i) recon.push_back(train_step(s, stream.next()).recon);
        double head = 0, tail = 0;
        for (int i = 0; i < 20; ++i) {
            head += recon[i] / 20;
            tail += recon[180 + i] / 20;
        }
        EXPECT_LT(tail, 0.75 * head) << method_name(m);
    }
}

TEST(Evaluate, PerfectReconstructionReportsInfinitePsnr) {
    TrainState s = init_state([] {
        ModelConfig c;
        c.n_x = 1;
        c.K = 2;
        c.M = 1;
        c.n_z = 1;
        c.hidden = {};
        return c;
    }());
    s.net = identity_net();
    s.codebook = vq::Codebook::from_values(2, 1, 1, {0.5, -0.25}, {0.0, 0.0});
    const auto m = evaluate(s, tiny_dataset({0.5, -0.25, -0.25, 0.5}, 1));
    EXPECT_EQ(m.mse, 0.0);
    EXPECT_TRUE(std::isinf(m.psnr) && m.psnr > 0);
    EXPECT_DOUBLE_EQ(m.perplexities[0], 2.0);
    EXPECT_EQ(m.usage.counts[0], (std::vector<std::uint64_t>{2, 2}));
}

TEST(Evaluate, MatchesIndependentRecomputation) {
    ModelConfig c = synthetic_config(Method::VqWae);
    TrainState s = init_state(c);
    auto d = data::gen_gaussian_mixture(8, 2, 40, 0.05, 4);
    data::BatchStream stream(d, 32, 1, true);
    for (int i = 0; i < 30; ++i) train_step(s, stream.next());

    const auto m = evaluate(s, d, 37);
    double sse = 0.0;
    std::vector<std::uint64_t> counts(c.K, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto z = otvq::testing::plain_mlp(s.net.encoder, {d.sample(i).begin(), d.sample(i).end()});
        const std::size_t k = vq::nearest_atom(z, s.codebook.atoms.values(), c.n_z);
        ++counts[k];
        const std::vector<double> q(s.codebook.atoms.values().begin() + k * c.n_z,
                                    s.codebook.atoms.values().begin() + (k + 1) * c.n_z);
        const auto xr = otvq::testing::plain_mlp(s.net.decoder, q);
        for (std::size_t j = 0; j < 2; ++j) sse += (xr[j] - d.sample(i)[j]) * (xr[j] - d.sample(i)[j]);
    }
    const double mse = sse / static_cast<double>(d.samples.size());
    EXPECT_NEAR(m.mse, mse, 1e-12 * std::max(1.0, mse));
    EXPECT_NEAR(m.psnr, 10.0 * std::log10(d.peak * d.peak / mse), 1e-9);
    EXPECT_EQ(m.usage.counts[0], counts);
    EXPECT_GE(m.perplexities[0], 1.0);
    EXPECT_LE(m.perplexities[0], static_cast<double>(c.K));
}

TEST(Evaluate, EmptyDatasetRejected) {
    TrainState s = init_state(synthetic_config(Method::VqVae));
    EXPECT_THROW(evaluate(s, data::Dataset{}), ValueError);
}

TEST(Checkpoint, RoundTripThenStepMatchesUninterrupted) {
    for (Method meth : {Method::VqVae, Method::VqWae}) {
        auto d = data::gen_gaussian_mixture(8, 2, 16, 0.05, 2);
        TrainState a = init_state(synthetic_config(meth));
        data::BatchStream stream(d, 32, 9, true);
        for (int i = 0; i < 5; ++i) train_step(a, stream.next());
        a.sampler_state = stream.save_state();

        const auto path = std::filesystem::temp_directory_path() / "otvq_ckpt_roundtrip.bin";
        save_checkpoint(path, a);
        TrainState b = load_checkpoint(path);
        EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));

        data::BatchStream restored(d, 32, 0, true);
        restored.load_state(b.sampler_state);
        for (int i = 0; i < 3; ++i) EXPECT_EQ(train_step(a, stream.next()), train_step(b, restored.next()));
        EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
    }
}

TEST(Checkpoint, CorruptInputsRejected) {
    const auto bytes = encode_checkpoint(init_state(synthetic_config(Method::VqWae)));
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
    EXPECT_THROW(load_checkpoint("/nonexistent/otvq.ckpt"), IoError);
}
