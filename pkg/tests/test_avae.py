import numpy as np
import pytest
from _oracles import avae_fd_error

from zslias import avae
from zslias.avae import AvaeHyper
from zslias.dataset import synth_generate
from zslias.errors import ValidationError
from zslias.metrics import sliced_wasserstein


@pytest.fixture(scope="module")
def planted():
    seen, unseen, attrs, split = synth_generate(8, 3, 5, 0, 40, 6, 0.3, 11)
    hyper = AvaeHyper(z_dim=4, hidden=64, recon_sigma=0.3, lr=3e-3, epochs=150, batch=32, seed=1,
                      sample_likelihood=True)
    return seen, unseen, attrs, split, avae.train_avae(seen, attrs, hyper)


@pytest.mark.parametrize("seed", range(6))
def test_gradients_match_finite_differences(seed):
    assert avae_fd_error(seed) < 1e-3


def test_kl_zero_for_standard_posterior():
    rng = np.random.default_rng(0)
    m = avae.init_model(4, 3, 2, 5, 1.0, rng)
    for k in ("mu_w", "mu_b", "lv_w", "lv_b"):
        m.params[k][...] = 0.0
    kl, _ = avae.elbo_terms(rng.normal(size=4), rng.uniform(size=3), m, rng.normal(size=2))
    assert kl[0] == 0.0


def test_perfect_reconstruction_log_density():
    rng = np.random.default_rng(1)
    d = 5
    m = avae.init_model(d, 2, 3, 4, 1.0, rng)
    x = rng.normal(size=d)
    m.params["out_w"][...] = 0.0
    m.params["out_b"][...] = x
    _, rec = avae.elbo_terms(x, rng.uniform(size=2), m, rng.normal(size=3))
    assert rec[0] == pytest.approx(-0.5 * d * np.log(2 * np.pi), abs=1e-12)


def test_elbo_scalar_and_batch_agree():
    rng = np.random.default_rng(2)
    m = avae.init_model(3, 2, 2, 4, 0.5, rng)
    x, a, e = rng.normal(size=(4, 3)), rng.uniform(size=(4, 2)), rng.normal(size=(4, 2))
    batch = avae.elbo(x, a, m, e)
    assert batch.shape == (4,)
    assert avae.elbo(x[1], a[1], m, e[1]) == pytest.approx(batch[1])


def test_shape_errors():
    m = avae.init_model(3, 2, 2, 4, 0.5)
    with pytest.raises(ValidationError):
        avae.elbo(np.zeros(4), np.zeros(2), m, np.zeros(2))
    with pytest.raises(ValidationError):
        avae.init_model(3, 2, 0, 4)


def test_zero_latent_rejected_by_training():
    seen, _, attrs, _ = synth_generate(3, 2, 3, 0, 5, 4, 0.1, 0)
    with pytest.raises(ValidationError):
        avae.train_avae(seen, attrs, AvaeHyper(z_dim=0, epochs=1))


def test_training_deterministic_and_improving():
    seen, _, attrs, _ = synth_generate(4, 2, 3, 1, 20, 5, 0.3, 4)
    h = AvaeHyper(z_dim=3, hidden=16, recon_sigma=0.3, lr=3e-3, epochs=40, batch=16, seed=7)
    m1, m2 = avae.train_avae(seen, attrs, h), avae.train_avae(seen, attrs, h)
    assert np.array_equal(m1.flat(), m2.flat())
    traj = m1.elbo_trajectory
    assert len(traj) == 40 and np.mean(traj[-10:]) > np.mean(traj[:10])


def test_generate_contract(planted):
    _, _, attrs, split, model = planted
    uc = list(split.unseen_classes)
    g1 = avae.generate(model, attrs.values[uc], 7, 3, class_ids=uc)
    g2 = avae.generate(model, attrs.values[uc], 7, 3, class_ids=uc)
    assert g1.features.shape == (21, 6) and g1.role == "generated"
    assert sorted(set(g1.labels.tolist())) == uc
    assert np.array_equal(g1.features, g2.features)
    with pytest.raises(ValidationError):
        avae.generate(model, attrs.values[uc], 0, 3)


def test_generated_closer_to_unseen_than_seen_is(planted):
    seen, unseen, attrs, split, model = planted
    uc = list(split.unseen_classes)
    gen = avae.generate(model, attrs.values[uc], 40, 5, class_ids=uc, sample_likelihood=True)
    assert sliced_wasserstein(gen.features, unseen.features) < sliced_wasserstein(seen.features, unseen.features)


def test_seen_conditioning_lands_near_own_prototype():
    seen, _, attrs, _, info = synth_generate(8, 2, 5, 0, 40, 6, 0.0, 11, return_info=True)
    h = AvaeHyper(z_dim=4, hidden=64, recon_sigma=0.3, lr=3e-3, epochs=300, batch=32, seed=1)
    model = avae.train_avae(seen, attrs, h)
    sc = list(range(8))
    gen = avae.generate(model, attrs.values[sc], 30, 9, class_ids=sc)
    protos = np.array([seen.features[seen.labels == c].mean(axis=0) for c in sc])
    nearest = np.argmin(((gen.features[:, None, :] - protos[None]) ** 2).sum(-1), axis=1)
    assert np.mean(nearest == gen.labels) >= 0.8


def test_model_round_trip(tmp_path, planted):
    model = planted[-1]
    avae.save_model(tmp_path, model)
    back = avae.load_model(tmp_path)
    assert np.array_equal(back.flat(), model.flat()) and back.recon_sigma == model.recon_sigma
