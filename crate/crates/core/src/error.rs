use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Pixel buffer length does not match `width * height`, or a dimension is zero.
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    /// Two rasters that must share a shape do not.
    DimensionMismatch,
    /// A parameter is outside its documented domain.
    InvalidParameter(&'static str),
    /// Input image is smaller than an operation requires.
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },
    /// Histogram holds a single gray value; no threshold separates anything.
    DegenerateHistogram,
    /// Seed or window lies outside the image.
    OutOfBounds { x: usize, y: usize },
    EmptyInput,
    /// Features and labels disagree in count or dimension.
    InconsistentData(&'static str),
    /// A class has too few samples to be split.
    ClassTooSmall { class: u8, count: usize },
    /// Label outside the trainable categories 1..=4.
    UnsupportedClass(u8),
    /// Training needs at least two distinct classes.
    SingleClass,
    /// NaN or infinity in features or during optimisation.
    NonFinite(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimensions { width, height, len } => write!(
                f,
                "invalid raster: {width}x{height} with {len} pixels"
            ),
            Error::DimensionMismatch => f.write_str("raster dimensions do not match"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::ImageTooSmall {
                width,
                height,
                min_width,
                min_height,
            } => write!(
                f,
                "image {width}x{height} is smaller than the required {min_width}x{min_height}"
            ),
            Error::DegenerateHistogram => f.write_str("histogram holds a single gray level"),
            Error::OutOfBounds { x, y } => write!(f, "coordinate ({x}, {y}) is out of bounds"),
            Error::EmptyInput => f.write_str("empty input"),
            Error::InconsistentData(what) => write!(f, "inconsistent data: {what}"),
            Error::ClassTooSmall { class, count } => {
                write!(f, "class {class} has {count} sample(s); at least 2 required")
            }
            Error::UnsupportedClass(c) => write!(f, "class {c} cannot be used for training"),
            Error::SingleClass => f.write_str("at least two distinct classes are required"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for Error {}
