//! Typed row-major rasters and the dynamically typed array used for file I/O.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Element types that can be stored in an NPY file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    U8,
    U16,
    U32,
    F32,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::U8 => "|u1",
            DType::U16 => "<u2",
            DType::U32 => "<u4",
            DType::F32 => "<f4",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::U32 | DType::F32 => 4,
        }
    }
}

/// Flat element storage tagged with its dtype.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    F32(Vec<f32>),
}

impl ArrayData {
    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::U8(_) => DType::U8,
            ArrayData::U16(_) => DType::U16,
            ArrayData::U32(_) => DType::U32,
            ArrayData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::U8(v) => v.len(),
            ArrayData::U16(v) => v.len(),
            ArrayData::U32(v) => v.len(),
            ArrayData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scalar types with an NPY representation.
pub trait Element: Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    const DTYPE: DType;
    fn wrap(values: Vec<Self>) -> ArrayData;
    fn unwrap(data: ArrayData) -> Option<Vec<Self>>;
}

macro_rules! impl_element {
    ($t:ty, $variant:ident) => {
        impl Element for $t {
            const DTYPE: DType = DType::$variant;
            fn wrap(values: Vec<Self>) -> ArrayData {
                ArrayData::$variant(values)
            }
            fn unwrap(data: ArrayData) -> Option<Vec<Self>> {
                match data {
                    ArrayData::$variant(v) => Some(v),
                    _ => None,
                }
            }
        }
    };
}

impl_element!(u8, U8);
impl_element!(u16, U16);
impl_element!(u32, U32);
impl_element!(f32, F32);

/// An n-dimensional C-order array as stored in an NPY file.
#[derive(Clone, Debug, PartialEq)]
pub struct NdArray {
    shape: Vec<usize>,
    data: ArrayData,
}

impl NdArray {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, ArrayData) {
        (self.shape, self.data)
    }

    /// Interpret a 2D array as a typed raster.
    pub fn into_raster<T: Element>(self) -> Result<Raster<T>> {
        if self.shape.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "expected a 2D array, found shape {:?}",
                self.shape
            )));
        }
        let (h, w) = (self.shape[0], self.shape[1]);
        let found = self.dtype();
        let data = T::unwrap(self.data).ok_or_else(|| {
            Error::Unsupported(format!("expected dtype {:?}, found {found:?}", T::DTYPE))
        })?;
        Raster::from_vec(h, w, data)
    }

    /// Interpret a 3D array with a leading channel axis as a stack of rasters.
    /// A 2D array loads as a single-layer stack.
    pub fn into_stack<T: Element>(self) -> Result<Vec<Raster<T>>> {
        let (layers, h, w) = match self.shape.as_slice() {
            [h, w] => (1, *h, *w),
            [c, h, w] => (*c, *h, *w),
            other => {
                return Err(Error::InvalidInput(format!(
                    "expected a 2D or 3D array, found shape {other:?}"
                )))
            }
        };
        let found = self.dtype();
        let data = T::unwrap(self.data).ok_or_else(|| {
            Error::Unsupported(format!("expected dtype {:?}, found {found:?}", T::DTYPE))
        })?;
        let plane = h * w;
        (0..layers)
            .map(|i| Raster::from_vec(h, w, data[i * plane..(i + 1) * plane].to_vec()))
            .collect()
    }

    /// Convert any supported dtype to f32 values, keeping the shape.
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            ArrayData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            ArrayData::U16(v) => v.iter().map(|&x| x as f32).collect(),
            ArrayData::U32(v) => v.iter().map(|&x| x as f32).collect(),
            ArrayData::F32(v) => v.clone(),
        }
    }
}

impl<T: Element> From<Raster<T>> for NdArray {
    fn from(r: Raster<T>) -> Self {
        NdArray {
            shape: vec![r.height, r.width],
            data: T::wrap(r.data),
        }
    }
}

impl From<&Raster<bool>> for NdArray {
    fn from(r: &Raster<bool>) -> Self {
        NdArray::from(r.map(|&b| b as u8))
    }
}

/// Stack equally sized rasters along a new leading axis.
pub fn stack_rasters<T: Element>(layers: &[Raster<T>]) -> Result<NdArray> {
    let Some(first) = layers.first() else {
        return Err(Error::InvalidInput("cannot stack zero layers".into()));
    };
    let mut data = Vec::with_capacity(layers.len() * first.len());
    for layer in layers {
        first.check_same_shape(layer)?;
        data.extend_from_slice(layer.as_slice());
    }
    NdArray::new(vec![layers.len(), first.height, first.width], T::wrap(data))
}

/// A row-major 2D grid of values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Binary raster.
pub type Mask = Raster<bool>;

impl<T> Raster<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} raster needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn check_same_shape<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }
}

impl<T: Clone> Raster<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.shape() == other.shape() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Interpret a numeric raster as binary, nonzero meaning set.
    pub fn from_nonzero<T: Element>(r: &Raster<T>) -> Mask {
        r.map(|v| *v != T::default())
    }
}

/// Offsets of the 4- or 8-neighborhood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }

    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidInput(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    /// In-bounds neighbors of `(row, col)` in a `height` x `width` grid.
    pub(crate) fn neighbors(
        self,
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    ) -> impl Iterator<Item = (usize, usize)> {
        self.offsets().iter().filter_map(move |&(dr, dc)| {
            let r = row.checked_add_signed(dr)?;
            let c = col.checked_add_signed(dc)?;
            (r < height && c < width).then_some((r, c))
        })
    }
}
