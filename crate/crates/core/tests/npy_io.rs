use std::path::PathBuf;

use dowseg::npy::{decode, encode, read_array, write_array};
use dowseg::raster::{ArrayData, DType};
use dowseg::{Error, NdArray, Raster};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn reads_numpy_written_stack() {
    let a = read_array(fixture("stack_5x3x4_f32.npy")).unwrap();
    assert_eq!(a.shape(), &[5, 3, 4]);
    let layers = a.into_stack::<f32>().unwrap();
    assert_eq!(layers.len(), 5);
    for (k, layer) in layers.iter().enumerate() {
        for r in 0..3 {
            for c in 0..4 {
                let i = (k * 12 + r * 4 + c) as f32;
                assert_eq!(*layer.get(r, c), i * 0.5 - 3.25);
            }
        }
    }
}

#[test]
fn reads_integer_dtypes() {
    let u8a = read_array(fixture("u8_2x2.npy"))
        .unwrap()
        .into_raster::<u8>()
        .unwrap();
    assert_eq!(u8a.as_slice(), &[0, 1, 2, 3]);
    let u16a = read_array(fixture("u16_3x2.npy"))
        .unwrap()
        .into_raster::<u16>()
        .unwrap();
    assert_eq!(u16a.as_slice(), &[0, 1, 65535, 300, 7, 8]);
    let u32a = read_array(fixture("u32_2x3.npy"))
        .unwrap()
        .into_raster::<u32>()
        .unwrap();
    assert_eq!(u32a.as_slice(), &[0, 1, 2, 4_000_000_000, 5, 6]);
}

#[test]
fn accepts_version_two_header() {
    let a = read_array(fixture("u8_v2.npy")).unwrap();
    assert_eq!(a.shape(), &[1, 3]);
    assert_eq!(a.data(), &ArrayData::U8(vec![9, 8, 7]));
}

#[test]
fn writer_matches_numpy_bytes() {
    let raw = std::fs::read(fixture("u8_2x2.npy")).unwrap();
    let a = NdArray::from(Raster::from_vec(2, 2, vec![0u8, 1, 2, 3]).unwrap());
    assert_eq!(encode(&a), raw);
    let raw = std::fs::read(fixture("stack_5x3x4_f32.npy")).unwrap();
    assert_eq!(encode(&decode(&raw).unwrap()), raw);
}

#[test]
fn rejects_unsupported_layouts() {
    assert!(matches!(
        read_array(fixture("f4_fortran.npy")),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(
        read_array(fixture("f8_2x2.npy")),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(decode(b"not an npy file"), Err(Error::Format(_))));
    let mut raw = std::fs::read(fixture("u16_3x2.npy")).unwrap();
    raw.truncate(raw.len() - 1);
    assert!(matches!(decode(&raw), Err(Error::Format(_))));
    assert!(matches!(
        read_array(fixture("missing.npy")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn wrong_dimensionality_is_rejected() {
    let a = read_array(fixture("stack_5x3x4_f32.npy")).unwrap();
    assert!(a.into_raster::<f32>().is_err());
    let b = read_array(fixture("u8_2x2.npy")).unwrap();
    assert!(b.into_raster::<f32>().is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.npy");
    let r = Raster::from_fn(3, 5, |r, c| (r * 5 + c) as f32 / 7.0);
    write_array(&NdArray::from(r.clone()), &path).unwrap();
    assert_eq!(read_array(&path).unwrap().into_raster::<f32>().unwrap(), r);
}

fn arb_array() -> impl Strategy<Value = NdArray> {
    let shape = prop::collection::vec(1usize..6, 1..4);
    (shape, 0..4u8).prop_flat_map(|(shape, kind)| {
        let n: usize = shape.iter().product();
        let data = match kind {
            0 => prop::collection::vec(any::<u8>(), n)
                .prop_map(ArrayData::U8)
                .boxed(),
            1 => prop::collection::vec(any::<u16>(), n)
                .prop_map(ArrayData::U16)
                .boxed(),
            2 => prop::collection::vec(any::<u32>(), n)
                .prop_map(ArrayData::U32)
                .boxed(),
            _ => prop::collection::vec(-1e6f32..1e6, n)
                .prop_map(ArrayData::F32)
                .boxed(),
        };
        data.prop_map(move |d| NdArray::new(shape.clone(), d).unwrap())
    })
}

proptest! {
    #[test]
    fn encode_decode_round_trip(a in arb_array()) {
        let bytes = encode(&a);
        prop_assert_eq!(bytes[..6].to_vec(), b"\x93NUMPY".to_vec());
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        prop_assert_eq!((10 + header_len) % 64, 0);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(back.dtype(), a.dtype());
        prop_assert_eq!(back, a);
    }
}

#[test]
fn dtype_descriptors() {
    assert_eq!(DType::U8.descr(), "|u1");
    assert_eq!(DType::U16.descr(), "<u2");
    assert_eq!(DType::U32.descr(), "<u4");
    assert_eq!(DType::F32.descr(), "<f4");
}
