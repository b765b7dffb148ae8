import numpy as np
import pytest

from feddart.core.models import ParameterVector
from feddart.errors import FactError
from feddart.fact.enums import AggregationAlgorithm, FactErrorCodes
from feddart.fact.models import (AbstractModel, Hyperparameters, LinearModel, LogisticModel, ModelConfig, build_model,
                                 local_train_fedprox)


def linear_data(seed: int, m: int = 40, d: int = 3, noise: float = 0.1):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, d))
    w = rng.standard_normal(d)
    return x, x @ w + 0.5 + noise * rng.standard_normal(m)


def central_differences(model: AbstractModel, params: np.ndarray, x: np.ndarray, y: np.ndarray,
                        h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(params)
    for i in range(len(params)):
        step = np.zeros_like(params)
        step[i] = h
        grad[i] = (model.loss_and_gradient(params + step, x, y)[0]
                   - model.loss_and_gradient(params - step, x, y)[0]) / (2 * h)
    return grad


@pytest.mark.parametrize("seed", range(10))
def test_linear_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((6, 3)), rng.standard_normal(6)
    params = rng.standard_normal(4)
    model = LinearModel(ModelConfig(n_features=3))

    np.testing.assert_allclose(model.loss_and_gradient(params, x, y)[1], central_differences(model, params, x, y),
                               rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_logistic_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    x, y = rng.standard_normal((6, 2)), rng.integers(0, 2, 6).astype(float)
    params = rng.standard_normal(3)
    model = LogisticModel(ModelConfig(n_features=2))

    np.testing.assert_allclose(model.loss_and_gradient(params, x, y)[1], central_differences(model, params, x, y),
                               rtol=1e-5, atol=1e-7)


def test_logistic_loss_is_stable_for_large_margins():
    model = LogisticModel(ModelConfig(n_features=1))
    loss, grad = model.loss_and_gradient(np.array([1000.0, 0.0]), np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))

    assert np.isfinite(loss) and loss < 1e-12
    assert np.all(np.isfinite(grad))


def test_train_is_reproducible_under_a_seed():
    x, y = linear_data(1)
    first = LinearModel(ModelConfig(n_features=3), Hyperparameters(batch_size=8, local_epochs=3))
    second = first.copy()

    a = first.train(x, y, np.random.default_rng(5))
    b = second.train(x, y, np.random.default_rng(5))

    assert a.values == b.values
    assert a.sample_count == len(y)


def test_training_reduces_the_loss():
    x, y = linear_data(2)
    model = LinearModel(ModelConfig(n_features=3), Hyperparameters(learning_rate=0.1, batch_size=8, local_epochs=5))
    before = model.loss(x, y)
    model.train(x, y, np.random.default_rng(0))

    assert model.loss(x, y) < before


def test_fedprox_with_zero_mu_is_plain_training():
    x, y = linear_data(3)
    model = LinearModel(ModelConfig(n_features=3), Hyperparameters(learning_rate=0.05, batch_size=4))
    global_parameters = ParameterVector(values=[0.3, -0.2, 0.1, 0.0])

    prox = local_train_fedprox(model, global_parameters, x, y, mu=0.0, epochs=4, rng=np.random.default_rng(9))

    plain = model.copy()
    plain.parameters = global_parameters
    expected = plain.train(x, y, np.random.default_rng(9),
                           hyperparameters=model.hyperparameters.merged({"local_epochs": 4}))

    assert prox.values == expected.values


def test_fedprox_with_huge_mu_stays_at_the_global_parameters():
    for seed in range(5):
        x, y = linear_data(seed, noise=1.0)
        model = LinearModel(ModelConfig(n_features=3), Hyperparameters(learning_rate=0.1, batch_size=5))
        global_parameters = ParameterVector(values=[1.0, -1.0, 2.0, 0.5])

        trained = local_train_fedprox(model, global_parameters, x, y, mu=1e6, epochs=3,
                                      rng=np.random.default_rng(seed))

        assert np.max(np.abs(trained.as_array() - global_parameters.as_array())) < 1e-3


def test_fedprox_converges_to_the_penalized_minimizer():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((30, 1))
    y = 2.0 * x[:, 0] - 1.0 + 0.3 * rng.standard_normal(30)
    anchor = np.array([0.5, 0.5])
    mu = 1.0

    # minimizer of 0.5 * mean((Xw - y)^2) + (mu / 2) * ||w - anchor||^2
    design = np.hstack([x, np.ones((30, 1))])
    expected = np.linalg.solve(design.T @ design / 30 + mu * np.eye(2), design.T @ y / 30 + mu * anchor)

    model = LinearModel(ModelConfig(n_features=1), Hyperparameters(learning_rate=0.1, batch_size=30))
    trained = local_train_fedprox(model, ParameterVector.from_array(anchor), x, y, mu=mu, epochs=2000,
                                  rng=np.random.default_rng(0))

    np.testing.assert_allclose(trained.as_array(), expected, atol=1e-8)


def test_negative_mu_is_refused():
    x, y = linear_data(0)
    model = LinearModel(ModelConfig(n_features=3))
    with pytest.raises(FactError) as exc:
        local_train_fedprox(model, model.parameters, x, y, mu=-1.0, epochs=1, rng=np.random.default_rng(0))
    assert exc.value.code == FactErrorCodes.BAD_CONFIG


def test_divergent_learning_rate_raises():
    x, y = linear_data(5)
    model = LinearModel(ModelConfig(n_features=3), Hyperparameters(learning_rate=100.0, batch_size=40,
                                                                   local_epochs=500))
    with pytest.raises(FactError) as exc:
        with np.errstate(all="ignore"):
            model.train(x, y, np.random.default_rng(0))
    assert exc.value.code == FactErrorCodes.NONFINITE_LOSS


def test_aggregate_follows_the_algorithm():
    results = [ParameterVector(values=[0.0, 0.0], sample_count=1), ParameterVector(values=[4.0, 8.0], sample_count=3)]

    plain = LinearModel(ModelConfig(n_features=1), aggregation_algorithm=AggregationAlgorithm.FEDAVG)
    weighted = LinearModel(ModelConfig(n_features=1), aggregation_algorithm=AggregationAlgorithm.WEIGHTED_FEDAVG)
    prox = LinearModel(ModelConfig(n_features=1), aggregation_algorithm=AggregationAlgorithm.FEDPROX)

    assert plain.aggregate(results).values == [2.0, 4.0]
    assert weighted.aggregate(results).values == [3.0, 6.0]
    assert prox.aggregate(results).values == [3.0, 6.0]


def test_parameter_length_is_fixed_by_the_config():
    model = LinearModel(ModelConfig(n_features=2))
    assert len(model.parameters) == 3

    with pytest.raises(FactError) as exc:
        model.parameters = ParameterVector(values=[1.0])
    assert exc.value.code == FactErrorCodes.LENGTH_MISMATCH


def test_model_round_trips_through_its_dict():
    model = LogisticModel(ModelConfig(n_features=2), Hyperparameters(learning_rate=0.3, mu=0.5),
                          AggregationAlgorithm.FEDPROX, ParameterVector(values=[1.0, 2.0, 3.0], sample_count=4))

    restored = AbstractModel.from_dict(model.to_dict())

    assert isinstance(restored, LogisticModel)
    assert restored.to_dict() == model.to_dict()


def test_copy_is_independent():
    model = LinearModel(ModelConfig(n_features=1))
    copy = model.copy()
    copy.parameters = ParameterVector(values=[1.0, 1.0])

    assert model.parameters.values == [0.0, 0.0]


def test_build_model_rejects_bad_descriptions():
    for model_type, config in [("forest", {"n_features": 2}), ("linear", {"n_features": 0})]:
        with pytest.raises(FactError) as exc:
            build_model(model_type, config)
        assert exc.value.code == FactErrorCodes.BAD_CONFIG


def test_hyperparameters_merge_known_keys_only():
    merged = Hyperparameters().merged({"learning_rate": 0.5, "epochs": 10, "round": 3})

    assert merged.learning_rate == 0.5
    assert merged.local_epochs == 1
    assert Hyperparameters().merged(None) == Hyperparameters()


def test_evaluate_metrics():
    x, y = linear_data(6)
    linear = LinearModel(ModelConfig(n_features=3))
    metrics = linear.evaluate(x, y)
    assert metrics["mse"] == pytest.approx(2 * metrics["loss"])
    assert metrics["n_samples"] == len(y)

    logistic = LogisticModel(ModelConfig(n_features=1), parameters=ParameterVector(values=[5.0, 0.0]))
    assert logistic.evaluate(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))["accuracy"] == 1.0
