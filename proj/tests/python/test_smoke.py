"""Smoke tests for the python bindings: one pass over the main operations."""

import math

import pytest

import levelup as lv


@pytest.fixture(scope="module")
def small_pool():
    spec = lv.PoolSpec()
    spec.modulus = 5
    spec.max_chain = 3
    spec.size = 300
    spec.seed = 42
    spec.pool_tag = "train"
    return lv.generate_pool(spec)


@pytest.fixture(scope="module")
def val_pool():
    spec = lv.PoolSpec()
    spec.modulus = 5
    spec.max_chain = 3
    spec.size = 150
    spec.seed = 43
    spec.pool_tag = "val"
    return lv.generate_pool(spec)


def test_pool_generation_is_deterministic(small_pool):
    spec = lv.PoolSpec()
    spec.modulus = 5
    spec.max_chain = 3
    spec.size = 300
    spec.seed = 42
    spec.pool_tag = "train"
    again = lv.generate_pool(spec)
    assert [p.id for p in again] == [p.id for p in small_pool]
    assert again[0].input == small_pool[0].input
    assert all(0 <= p.target < 5 for p in small_pool)


def test_encode_and_eval_chain():
    chain = lv.ArithChain()
    chain.start = 2
    chain.steps = [lv.ChainStep(lv.ChainOp.add, 3), lv.ChainStep(lv.ChainOp.mul, 2)]
    assert lv.eval_chain(chain, 7) == 3
    encoded = lv.encode(chain, 7, 6)
    assert len(encoded) == lv.encoded_dim(7, 6)
    assert sum(1 for v in encoded if v != 0.0) == 5

    with pytest.raises(ValueError):
        bad = lv.ArithChain()
        bad.start = 9
        lv.encode(bad, 7, 6)


def test_irt_solve_threshold():
    learner = lv.IrtLearner()
    learner.ability = 3.0
    assert lv.irt_solve(learner, 3.0) == 1
    assert lv.irt_solve(learner, 3.1) == 0


def test_learner_roundtrip(small_pool, tmp_path):
    config = lv.LearnerConfig()
    config.input_dim = lv.encoded_dim(5, 3)
    config.hidden_widths = [8]
    config.num_classes = 5
    config.init_scale = 0.4
    config.seed = 7
    ckpt = lv.init(config)

    probs = lv.forward(ckpt, small_pool[0].input)
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-9)
    assert lv.phi(ckpt, small_pool[0]) in (0, 1)

    spec = lv.TrainSpec()
    spec.learning_rate = 0.3
    spec.batch_size = 16
    before = lv.loss(ckpt, small_pool)
    current = ckpt
    for _ in range(50):
        current = lv.train_step(current, small_pool[:16], spec)
    assert lv.loss(current, small_pool[:16]) < before
    assert current.steps_trained == 50
    assert ckpt.steps_trained == 0  # functional updates

    path = tmp_path / "ckpt.bin"
    lv.save_checkpoint(current, str(path))
    loaded = lv.load_checkpoint(str(path))
    assert lv.forward(loaded, small_pool[0].input) == lv.forward(current, small_pool[0].input)


def test_series_extract_schedule(small_pool, val_pool):
    config = lv.LearnerConfig()
    config.input_dim = lv.encoded_dim(5, 3)
    config.hidden_widths = [12]
    config.num_classes = 5
    config.init_scale = 0.5
    config.seed = 7

    spec = lv.SeriesSpec()
    spec.kind = lv.SeriesKind.checkpoint
    spec.checkpoint_interval = 25
    train = lv.TrainSpec()
    train.learning_rate = 0.3
    train.batch_size = 16
    train.max_steps = 250
    train.shuffle_seed = 21
    spec.base_train = train

    checkpoints = lv.train_and_collect(config, small_pool, val_pool, spec)
    assert len(checkpoints) == 10
    series = lv.select_by_delta(checkpoints, 0.0)
    assert lv.validate_series(series).ok

    matrix = lv.build_matrix(series, small_pool)
    sets = lv.extract(matrix, "train")
    counted = (
        sets.transitional_count()
        + sets.excluded.always
        + sets.excluded.never
        + sets.excluded.inconsistent
    )
    assert counted == len(small_pool)

    if sets.transitional_count() > 0:
        schedule = lv.build_transitional_schedule(sets, "level_up", 2, 10, 4, seed=3)
        batches = lv.schedule_batches(schedule)
        assert len(batches) == 10
        assert all(len(ids) == 4 for _, ids in batches)


def test_classify_row_definition():
    assert lv.classify_row([0, 0, 1, 1]).cls == lv.TransitionClass.transitional
    assert lv.classify_row([0, 0, 1, 1]).tau == 2
    assert lv.classify_row([1, 1]).cls == lv.TransitionClass.always_solved
    assert lv.classify_row([0, 1, 0]).cls == lv.TransitionClass.inconsistent


def test_cosine_and_matching(small_pool):
    assert math.isclose(lv.cosine([1.0, 1.0], [1.0, 0.0]), 1.0 / math.sqrt(2.0))

    sets = lv.TransitionalSets()
    sets.series_id = "s"
    sets.pool_tag = "train"
    sets.num_levels = 2
    by_length = {1: [], 2: []}
    for p in small_pool:
        if p.features.chain_length in (1, 2):
            by_length[p.features.chain_length].append(p.id)
    sets.by_level = by_length

    report = lv.match_neo_transitional(sets, small_pool, small_pool[:50])
    assert report.unmatched + sum(len(v) for v in report.neo_by_level.values()) == 50


def test_iid_schedule_uniformity(small_pool):
    schedule = lv.build_iid_schedule(small_pool, 50, 8, seed=11)
    replay = lv.build_iid_schedule(small_pool, 50, 8, seed=11)
    assert lv.schedule_batches(schedule) == lv.schedule_batches(replay)
