use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecap_core::bank::BankSet;
use ecap_core::compositor::{build_composite, ecap_dacs_mix, MixInputs, Provenance, TransformConfig};
use ecap_core::harness::{gen_domain_pair, PixelClassifier, SyntheticSceneConfig};
use ecap_core::snapshot::{load_tensor, save_tensor, Tensor};
use ecap_core::{draw, extract_class_samples, generate_pseudo_label, ImageId, SamplerConfig};

/// Fills banks from an untrained teacher, then runs one full augmentation.
#[test]
fn bank_to_mixed_sample() {
    let cfg = SyntheticSceneConfig {
        height: 20,
        width: 20,
        n_source: 4,
        n_target: 10,
        ..Default::default()
    };
    let data = gen_domain_pair(&cfg, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let teacher = PixelClassifier::init(8, cfg.num_classes, &mut rng);
    let mut banks = BankSet::new(cfg.num_classes);
    for (i, scene) in data.target_train.iter().enumerate() {
        let out = generate_pseudo_label(teacher.forward(&scene.image).unwrap());
        let entries = extract_class_samples(&scene.image, &out, ImageId(i as u64)).unwrap();
        banks.insert(entries, ImageId(i as u64)).unwrap();
    }
    for bank in banks.banks() {
        let mut ids: Vec<_> = bank.entries().iter().map(|e| e.image_id).collect();
        ids.dedup();
        assert_eq!(ids.len(), bank.len());
    }

    let sampler = SamplerConfig { n0: 1.0, beta: 0.0, gamma: 0.01, ..Default::default() };
    let sample = draw(&banks, &sampler, &mut rng);
    assert!(!sample.is_empty());
    let comp = build_composite(&sample, &mut rng, (20, 20), cfg.num_classes, &TransformConfig::default()).unwrap();

    let target = &data.target_train[0];
    let out = generate_pseudo_label(teacher.forward(&target.image).unwrap());
    let source = &data.source[0];
    let source_label = source.one_hot();
    let inputs = MixInputs {
        source: &source.image,
        source_label: &source_label,
        target: &target.image,
        target_label: &out.pseudo_label,
        target_probs: &out.probs,
    };
    let mixed = ecap_dacs_mix(inputs, &comp.canvas, 0.968, &mut rng).unwrap();
    assert!(mixed.label.is_fully_populated());
    for p in 0..400 {
        match mixed.provenance[p] {
            Provenance::Target => assert!(!mixed.mask.get(p)),
            Provenance::Composite => {
                assert!(mixed.mask.get(p) && comp.canvas.populated.get(p));
                assert_eq!(mixed.weight[p], 1.0);
                assert_eq!(mixed.image.pixel_at(p), comp.canvas.image.pixel_at(p));
            }
            Provenance::Source => {
                assert!(mixed.mask.get(p) && !comp.canvas.populated.get(p));
                assert_eq!(mixed.image.pixel_at(p), source.image.pixel_at(p));
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    banks.save(dir.path().join("banks.bin")).unwrap();
    assert_eq!(BankSet::load(dir.path().join("banks.bin")).unwrap(), banks);
    save_tensor(dir.path().join("x.tns"), &Tensor::Image(mixed.image.clone())).unwrap();
    save_tensor(dir.path().join("y.tns"), &Tensor::OneHot(mixed.label.clone())).unwrap();
    assert_eq!(load_tensor(dir.path().join("x.tns")).unwrap(), Tensor::Image(mixed.image));
    assert_eq!(load_tensor(dir.path().join("y.tns")).unwrap(), Tensor::OneHot(mixed.label));
}
