use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use proptest::prelude::*;
use tel_core::io::{
    load_image, load_label_map, load_tensor, save_image, save_label_map, save_tensor,
};
use tel_core::{DenseTensor, Error, LabelMap, IGNORE_INDEX};

fn write_png(
    path: &Path,
    w: u32,
    h: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) {
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path).unwrap()), w, h);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut writer = enc.write_header().unwrap();
    writer.write_image_data(data).unwrap();
}

#[test]
fn black_rgb_image_loads_as_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("black.png");
    write_png(
        &path,
        2,
        2,
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &[0; 12],
    );
    let t = load_image(&path).unwrap();
    assert_eq!(t.shape(), (3, 2, 2));
    assert!(t.data().iter().all(|&v| v == 0.0));
}

#[test]
fn rgb_and_gray_values_scale_by_255() {
    let dir = tempfile::tempdir().unwrap();
    let red = dir.path().join("red.png");
    write_png(
        &red,
        1,
        1,
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &[255, 0, 0],
    );
    assert_eq!(load_image(&red).unwrap().data(), &[1.0, 0.0, 0.0]);

    let gray = dir.path().join("gray.png");
    write_png(
        &gray,
        2,
        1,
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &[0, 128],
    );
    let t = load_image(&gray).unwrap();
    assert_eq!(t.shape(), (1, 1, 2));
    assert_eq!(t.data()[0], 0.0);
    assert!((t.data()[1] - 128.0 / 255.0).abs() < 1e-15);
}

#[test]
fn sixteen_bit_and_missing_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let deep = dir.path().join("deep.png");
    write_png(
        &deep,
        1,
        1,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &[1, 2],
    );
    match load_image(&deep) {
        Err(Error::Format { path, .. }) => assert_eq!(path, deep),
        other => panic!("expected format error, got {other:?}"),
    }
    assert!(matches!(
        load_image(dir.path().join("nope.png")),
        Err(Error::Io { .. })
    ));
    let rgba = dir.path().join("rgba.png");
    write_png(
        &rgba,
        1,
        1,
        png::ColorType::Rgba,
        png::BitDepth::Eight,
        &[1, 2, 3, 4],
    );
    assert!(matches!(load_image(&rgba), Err(Error::Format { .. })));
}

#[test]
fn grayscale_label_maps_validate_classes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.png");
    write_png(
        &path,
        2,
        2,
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &[0, 1, 255, 1],
    );
    let m = load_label_map(&path, 2).unwrap();
    assert_eq!((m.labeled_count(), m.unlabeled_count()), (3, 1));
    match load_label_map(&path, 1) {
        Err(Error::Label {
            row, col, value, ..
        }) => assert_eq!((row, col, value), (0, 1, 1)),
        other => panic!("expected label error, got {other:?}"),
    }
}

#[test]
fn fully_unlabeled_map_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.png");
    let m = LabelMap::unlabeled(3, 5, 4).unwrap();
    save_label_map(&m, &path).unwrap();
    let back = load_label_map(&path, 4).unwrap();
    assert_eq!(back.labeled_count(), 0);
    assert_eq!(back, m);
}

#[test]
fn saved_image_reloads_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.png");
    let t = DenseTensor::new(3, 2, 2, (0..12).map(|k| k as f64 / 11.0).collect()).unwrap();
    save_image(&t, &path).unwrap();
    let back = load_image(&path).unwrap();
    for (a, b) in t.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn half_tensor_file_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.telt");
    save_tensor(&DenseTensor::new(1, 1, 1, vec![0.5]).unwrap(), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 20);
    assert_eq!(&bytes[16..], &[0x00, 0x00, 0x00, 0x3F]);
    std::fs::write(&path, b"XXXX\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\x3f").unwrap();
    assert!(matches!(load_tensor(&path), Err(Error::Format { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tensor_files_round_trip_bit_exactly(
        (c, h, w, values) in (1usize..4, 1usize..6, 1usize..6)
            .prop_flat_map(|(c, h, w)| (Just(c), Just(h), Just(w),
                proptest::collection::vec(-1e6f32..1e6, c * h * w)))
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.telt");
        let t = DenseTensor::new(c, h, w, values.iter().map(|&v| f64::from(v)).collect()).unwrap();
        save_tensor(&t, &path).unwrap();
        let back = load_tensor(&path).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        let first = std::fs::read(&path).unwrap();
        save_tensor(&back, &path).unwrap();
        prop_assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn label_maps_round_trip(
        (h, w, k, raw) in (1usize..9, 1usize..9, 1usize..8)
            .prop_flat_map(|(h, w, k)| (Just(h), Just(w), Just(k),
                proptest::collection::vec(0u8..=255, h * w)))
    ) {
        let labels: Vec<u8> = raw.iter()
            .map(|&v| if v >= 200 { IGNORE_INDEX } else { v % k as u8 })
            .collect();
        let m = LabelMap::new(h, w, k, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        save_label_map(&m, &path).unwrap();
        prop_assert_eq!(load_label_map(&path, k).unwrap(), m);
    }
}
