use criterion::{criterion_group, criterion_main, Criterion};
use emconv_core::fit::{
    fit_lorentzian, fit_power_law, fit_single_reflection, fit_two_mode_eit, EitData, EitWindow,
    FitProblem, PowerLawData,
};
use emconv_core::harness::{fink2018, synthesize_spectrum, NoiseSpec, SynthModel};

fn mean_power(v: &[emconv_core::Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
}

fn noisy(model: SynthModel, seed: u64) -> emconv_core::ComplexSpectrum {
    let cfg = fink2018();
    let clean = synthesize_spectrum(&cfg, model, None, NoiseSpec::NONE).unwrap().spectrum;
    let noise = NoiseSpec::from_snr_db(30.0, mean_power(&clean.value), seed).unwrap();
    synthesize_spectrum(&cfg, model, None, noise).unwrap().spectrum
}

fn fits(c: &mut Criterion) {
    let cfg = fink2018();

    let refl = FitProblem::new(noisy(SynthModel::SingleReflection(0), 1));
    c.bench_function("fit/single_reflection", |b| {
        b.iter(|| fit_single_reflection(&refl).unwrap())
    });

    let drives = cfg.drives().unwrap();
    let cal = cfg.calibrations().unwrap();
    let window = |i: usize| EitWindow {
        spectrum: noisy(SynthModel::Eit(i), 10 + i as u64),
        drive_omega: drives[i].omega_d,
        calibration: cal[i],
    };
    let eit = FitProblem::new(EitData {
        resonators: cfg.resonators().unwrap(),
        windows: [window(0), window(1)],
    });
    c.bench_function("fit/two_mode_eit", |b| b.iter(|| fit_two_mode_eit(&eit).unwrap()));

    let lor = FitProblem::new(noisy(SynthModel::Conversion, 3).to_power());
    c.bench_function("fit/lorentzian", |b| b.iter(|| fit_lorentzian(&lor).unwrap()));

    let x: Vec<f64> = (0..20).map(|k| 10f64.powf(4.0 + 0.25 * k as f64)).collect();
    let y: Vec<f64> = x.iter().map(|v| 1e-3 * v.sqrt()).collect();
    let pl = FitProblem::new(PowerLawData::new(x, y).unwrap());
    c.bench_function("fit/power_law", |b| b.iter(|| fit_power_law(&pl).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = fits
}
criterion_main!(benches);
