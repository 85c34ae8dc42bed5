import numpy as np
import pytest

from cpslab import (
    CsvSchema,
    InclusionMask,
    ModelId,
    ParseError,
    PriorConfig,
    SchemaError,
    Segmentation,
    gen_example1,
    gen_example2,
    gen_example3,
    load_csv,
    log_marginal,
    write_dataset_csv,
)


class TestExample1:
    def test_ground_truth_layout(self):
        ds, truth = gen_example1(0)
        assert ds.n == 497 and ds.X is None
        assert truth.true_changepoints == [139, 226, 243, 300, 309, 334]
        assert len(truth.true_theta) == 7
        assert truth.true_sigma_per_segment == [0.2] * 7

    def test_block3_mean_concentration(self):
        # block mean within 3 sd(mean) of 1.07 (17 observations, sd 0.2)
        for seed in (0, 1, 2):
            ds, _ = gen_example1(seed)
            block = ds.y[225:242]
            assert abs(float(np.mean(block)) - 1.07) <= 3 * 0.2 / np.sqrt(17)

    def test_noise_variance(self):
        for seed in (0, 5, 11):
            ds, truth = gen_example1(seed)
            theta = np.repeat(
                truth.true_theta,
                np.diff([0] + [t - 1 for t in truth.true_changepoints] + [497]),
            )
            v = float(np.var(ds.y - theta))
            assert 0.8 * 0.04 <= v <= 1.2 * 0.04

    def test_seed_determinism(self):
        a, _ = gen_example1(9)
        b, _ = gen_example1(9)
        c, _ = gen_example1(10)
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)


class TestExample2:
    def test_dims_and_truth(self):
        ds, truth = gen_example2(0)
        assert ds.n == 250 and ds.X.shape == (250, 250)
        assert truth.true_changepoints == [76, 176]
        assert truth.true_active_set == [2, 3, 12]
        assert truth.true_sigma_per_segment == [1.2, 0.8, 1.0]

    def test_segment2_slope(self):
        # OLS of y on x2 over the middle block recovers the slope 2
        for seed in (0, 1, 2):
            ds, _ = gen_example2(seed)
            x = ds.X[75:175, 1]
            yy = ds.y[75:175]
            slope = float(np.cov(x, yy)[0, 1] / np.var(x))
            assert abs(slope - 2.0) <= 0.25


class TestExample3:
    def test_truth_fields(self):
        ds, truth = gen_example3(0)
        assert ds.n == 300 and ds.X.shape == (300, 250) and ds.ar_lag
        assert truth.true_changepoints == [91, 211]
        assert truth.rho == 0.5
        assert truth.true_active_set == [2, 3, 12, 251]
        assert ds.p == 251

    def test_residual_autocorrelation(self):
        # after removing the within-segment mean, the series keeps strong
        # first-order autocorrelation from the recursive term
        hits = 0
        for seed in range(5):
            ds, _ = gen_example3(seed)
            seg = ds.y[90:210] - float(np.mean(ds.y[90:210]))
            r = float(np.corrcoef(seg[:-1], seg[1:])[0, 1])
            hits += r > 0.3
        assert hits >= 4

    def test_evidence_sanity(self):
        # the true model beats the no-changepoint model in >= 19/20 seeds
        wins = 0
        for seed in range(20):
            ds, truth = gen_example3(seed)
            prior = PriorConfig(sigma2=1.0)
            idx0 = [j - 1 for j in truth.true_active_set]
            mask = InclusionMask.from_indices(ds.p, idx0)
            seg_true = Segmentation.from_block_starts(
                ds.n_model, [t - 1 - ds.offset for t in truth.true_changepoints]
            )
            m_true = ModelId(seg_true, mask)
            m_flat = ModelId(Segmentation.single_block(ds.n_model), mask)
            wins += log_marginal(ds, m_true, prior) > log_marginal(ds, m_flat, prior)
        assert wins >= 19


class TestCsv:
    def test_minimal_roundtrip(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("y\n1\n2\n3\n", encoding="utf-8")
        ds = load_csv(path)
        assert np.array_equal(ds.y, [1.0, 2.0, 3.0])
        assert ds.X is None

    def test_standardize(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("y\n1\n2\n3\n4\n", encoding="utf-8")
        ds = load_csv(path, CsvSchema(standardize=True))
        assert float(np.mean(ds.y)) == pytest.approx(0.0, abs=1e-12)
        assert float(np.std(ds.y)) == pytest.approx(1.0, abs=1e-12)
        assert ds.meta["standardize"] is True

    def test_sqrt_before_standardize(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("y\n4\n9\n", encoding="utf-8")
        ds = load_csv(path, CsvSchema(sqrt_transform=True))
        assert np.array_equal(ds.y, [2.0, 3.0])

    def test_covariates_selected_by_name(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("a,y,b\n1,10,4\n2,20,5\n3,30,6\n", encoding="utf-8")
        ds = load_csv(path, CsvSchema(covariates=["b"]))
        assert ds.X.shape == (3, 1)
        assert np.array_equal(ds.X[:, 0], [4.0, 5.0, 6.0])

    def test_missing_response_raises(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("z\n1\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_csv(path)

    def test_parse_error_carries_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x1\n1,2\n3,oops\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.row == 2
        assert err.value.column == "x1"

    def test_write_then_load(self, tmp_path):
        ds, _ = gen_example2(4)
        path = tmp_path / "ex2.csv"
        write_dataset_csv(path, ds)
        back = load_csv(path)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.X, ds.X)

    def test_write_byte_identical(self, tmp_path):
        ds, _ = gen_example1(7)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        write_dataset_csv(p1, ds)
        write_dataset_csv(p2, ds)
        assert p1.read_bytes() == p2.read_bytes()


class TestGroundTruthJson:
    def test_roundtrip(self):
        from cpslab.simulate import GroundTruth

        _, truth = gen_example3(1)
        d = truth.to_dict()
        back = GroundTruth.from_dict(d)
        assert back.true_changepoints == truth.true_changepoints
        assert back.rho == 0.5
        assert back.true_active_set == truth.true_active_set


class TestGeneratorInvariants:
    def test_truth_is_seed_independent(self):
        for gen in (gen_example1, gen_example2, gen_example3):
            _, t1 = gen(0)
            _, t2 = gen(99)
            assert t1.true_changepoints == t2.true_changepoints
            assert t1.true_active_set == t2.true_active_set
            assert t1.true_sigma_per_segment == t2.true_sigma_per_segment

    def test_evidence_sanity_example1(self):
        wins = 0
        for seed in range(20):
            ds, truth = gen_example1(seed)
            prior = PriorConfig(sigma2=0.04)
            seg_true = Segmentation.from_block_starts(
                ds.n, [t - 1 for t in truth.true_changepoints]
            )
            m_true = ModelId(seg_true, InclusionMask.empty(0))
            m_flat = ModelId(Segmentation.single_block(ds.n), InclusionMask.empty(0))
            wins += log_marginal(ds, m_true, prior) > log_marginal(ds, m_flat, prior)
        assert wins >= 19

    def test_evidence_sanity_example2(self):
        wins = 0
        for seed in range(20):
            ds, truth = gen_example2(seed)
            prior = PriorConfig(sigma2=1.0)
            mask = InclusionMask.from_indices(ds.p, [j - 1 for j in truth.true_active_set])
            seg_true = Segmentation.from_block_starts(
                ds.n, [t - 1 for t in truth.true_changepoints]
            )
            m_true = ModelId(seg_true, mask)
            m_flat = ModelId(Segmentation.single_block(ds.n), mask)
            wins += log_marginal(ds, m_true, prior) > log_marginal(ds, m_flat, prior)
        assert wins >= 19
