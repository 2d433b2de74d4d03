use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saber_xbar::backend::{CountingBackend, SoftwareBackend};
use saber_xbar::experiments::{run_roundtrip, BackendKind};
use saber_xbar::pke::{check_frame, frame_message, SaberPke};
use saber_xbar::polymult::MultAlgorithm;
use saber_xbar::xbar::CrossbarEngine;

fn seeds(rng: &mut impl Rng) -> ([u8; 32], [u8; 32], [u8; 32]) {
    (rng.random(), rng.random(), rng.random())
}

#[test]
fn ciphertext_bytes_do_not_depend_on_backend() {
    let pke = SaberPke::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let (sa, r, r2) = seeds(&mut rng);
        let m = frame_message(&rng.random::<[u8; 28]>(), 256).unwrap();
        let mut reference = None;
        for kind in BackendKind::all() {
            let mut b = kind.instance();
            let (pk, sk) = pke.keygen(&sa, &r, &mut b).unwrap();
            let ct = pke.encrypt(&pk, &m, &r2, &mut b).unwrap();
            assert_eq!(pke.decrypt(&sk, &ct, &mut b).unwrap(), m, "{kind}");
            let bytes = (pke.encode_public_key(&pk), pke.encode_ciphertext(&ct));
            match &reference {
                None => reference = Some(bytes),
                Some(want) => assert_eq!(&bytes, want, "{kind}"),
            }
        }
    }
}

#[test]
fn serialized_keys_roundtrip() {
    let pke = SaberPke::default();
    let mut sw = SoftwareBackend::new(MultAlgorithm::K4);
    let (pk, sk) = pke.keygen(&[3; 32], &[4; 32], &mut sw).unwrap();
    let m = frame_message(&[0xAB; 28], 256).unwrap();
    let ct = pke.encrypt(&pk, &m, &[5; 32], &mut sw).unwrap();
    let pk2 = pke.decode_public_key(&pke.encode_public_key(&pk)).unwrap();
    let sk2 = pke.decode_secret_key(&pke.encode_secret_key(&sk)).unwrap();
    let ct2 = pke.decode_ciphertext(&pke.encode_ciphertext(&ct)).unwrap();
    assert_eq!(pk2, pk);
    assert_eq!(sk2, sk);
    let got = pke.decrypt(&sk2, &ct2, &mut sw).unwrap();
    assert_eq!(check_frame(&got).unwrap(), vec![0xAB; 28]);
    assert_eq!(pke.ciphertext_bytes(), 3 * 256 * 10 / 8 + 256 * 4 / 8);
}

#[test]
fn census_and_write_policy() {
    let pke = SaberPke::default();
    let mut eng = CountingBackend::new(CrossbarEngine::ideal());
    let (pk, sk) = pke.keygen(&[1; 32], &[2; 32], &mut eng).unwrap();
    assert_eq!(eng.take(), 9);
    eng.inner.reset_stats();
    let m = frame_message(&[7; 28], 256).unwrap();
    let ct = pke.encrypt(&pk, &m, &[9; 32], &mut eng).unwrap();
    assert_eq!(eng.take(), 12);
    assert_eq!(eng.inner.stats().operand_cell_bits, 3072);

    eng.inner.preload(sk.s.polys()).unwrap();
    eng.inner.reset_stats();
    for _ in 0..3 {
        assert_eq!(pke.decrypt(&sk, &ct, &mut eng).unwrap(), m);
        assert_eq!(eng.take(), 3);
    }
    assert_eq!(eng.inner.stats().operand_cell_bits, 0);
    assert_eq!(eng.inner.stats().physical_cell_writes, 0);
}

#[test]
fn roundtrip_report_counts() {
    let r = run_roundtrip(BackendKind::Crossbar, 4, 11).unwrap();
    assert_eq!((r.trials, r.failures, r.census), (4, 0, [9, 12, 3]));
}
