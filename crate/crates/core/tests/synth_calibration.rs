//! Planted effects in generated corpora survive the full extraction and
//! fitting path.

use capmodel_core::pipeline::{analyze, PipelineOptions};
use capmodel_core::regress::{
    descriptive_stats, CovarianceVariant, fit_models, Dataset, RegressConfig, Stars,
};
use capmodel_core::synth::{generate_corpus, SynthConfig};

fn pharmacology_dataset(cfg: &SynthConfig) -> Dataset {
    let corpus = generate_corpus(cfg).unwrap().corpus().unwrap();
    let a = analyze(&corpus, &PipelineOptions::default()).unwrap();
    a.sds_dataset("BIO/14").unwrap()
}

#[test]
fn zero_distance_effect_is_rarely_significant() {
    let base = SynthConfig::preset("pharmacology").unwrap();
    // at 44 rows the uncorrected sandwich rejects a null coefficient about
    // 16% of the time at the 10% level; the n/(n-p) correction brings it to
    // about 15%
    let rc = RegressConfig {
        covariance: CovarianceVariant::Hc1,
        ..RegressConfig::default()
    };
    let mut quiet = 0;
    for seed in 1..=100 {
        let mut cfg = base.clone().with_seed(seed);
        cfg.collaboration.b_d = 0.0;
        let data = pharmacology_dataset(&cfg);
        let report = fit_models(&data, &rc).unwrap();
        let d = report.model1.tests.iter().find(|t| t.name == "d").unwrap();
        if d.p_value >= 0.10 {
            quiet += 1;
        }
    }
    assert!(quiet >= 85, "beta_d insignificant in {quiet} of 100 seeds");
}

#[test]
fn strong_quality_effect_is_detected() {
    let base = SynthConfig::preset("pharmacology").unwrap();
    let rc = RegressConfig::default();
    let mut hits = 0;
    for seed in 1..=100 {
        let mut cfg = base.clone().with_seed(seed);
        cfg.collaboration.b_q = 2.0;
        // star_scientist left out, as in the paper's final Model 2
        let data = pharmacology_dataset(&cfg).select(&["m", "d", "excell"]).unwrap();
        let report = fit_models(&data, &rc).unwrap();
        let row = report.model2.irr.iter().find(|r| r.name == "excell").unwrap();
        if row.irr > 1.0 && row.stars == Stars::Three {
            hits += 1;
        }
    }
    assert!(hits >= 90, "excell IRR > 1 with *** in {hits} of 100 seeds");
}

const TABLE4: [(&str, f64, f64); 4] = [
    ("cp", 2.386, 3.171),
    ("m", 14.227, 12.629),
    ("d", 368.405, 201.465),
    ("star_scientist", 0.933, 1.606),
];

#[test]
fn pharmacology_preset_matches_table4_shape() {
    let base = SynthConfig::preset("pharmacology").unwrap();
    let seeds = 20;
    let mut mean = [0.0; 4];
    let mut sd = [0.0; 4];
    for seed in 1..=seeds {
        let data = pharmacology_dataset(&base.clone().with_seed(seed));
        assert_eq!(data.n_obs(), 44);
        let stats = descriptive_stats(&data).unwrap();
        for (k, (name, _, _)) in TABLE4.iter().enumerate() {
            let s = stats.iter().find(|s| s.name == *name).unwrap();
            mean[k] += s.mean / seeds as f64;
            sd[k] += s.std_dev / seeds as f64;
        }
    }
    for (k, (name, m, s)) in TABLE4.iter().enumerate() {
        assert!((mean[k] - m).abs() / m <= 0.25, "{name} mean {} vs {m}", mean[k]);
        assert!((sd[k] - s).abs() / s <= 0.25, "{name} sd {} vs {s}", sd[k]);
    }
}

#[test]
fn aggregate_preset_has_all_universities() {
    let cfg = SynthConfig::preset("aggregate").unwrap();
    let corpus = generate_corpus(&cfg).unwrap().corpus().unwrap();
    let a = analyze(&corpus, &PipelineOptions::default()).unwrap();
    let data = a.aggregate_dataset().unwrap();
    assert_eq!(data.n_obs(), 68);
    assert_eq!(a.sds_codes().len(), 10);
    let stats = descriptive_stats(&data).unwrap();
    assert!(stats.iter().all(|s| s.obs == 68));
}
