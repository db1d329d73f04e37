//! Compact architecture strings such as `1x28x28-6C5-2P2-12C5-2P2-1000N-10N`.
//!
//! ```text
//! ARCH  := DIMS ("-" LAYER)+
//! DIMS  := int "x" int "x" int          channels x height x width
//! LAYER := int "C" int                  feature maps, filter side
//!        | int "P" int                  pooling window, stride
//!        | int "N"                      fully-connected units
//! ```
//!
//! `×` and `X` are accepted for `x`, and whitespace around `-` is ignored.

use std::fmt;
use std::str::FromStr;

use crate::error::ArchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerDesc {
    Conv { maps: usize, side: usize },
    Pool { window: usize, stride: usize },
    Full { units: usize },
}

/// Activation shape between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Maps { maps: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Maps { maps, h, w } => maps * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Maps { maps, h, w } => vec![maps, h, w],
            Shape::Flat(n) => vec![n],
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Maps { maps, h, w } => write!(f, "({maps},{h},{w})"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerDesc>,
    shapes: Vec<Shape>,
}

impl ArchSpec {
    pub fn parse(text: &str) -> Result<Self, ArchError> {
        Parser::new(text).parse()
    }

    /// Input shape followed by the output shape of every layer.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().expect("validated spec").len()
    }

    /// Weight and bias count.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .zip(&self.shapes)
            .map(|(layer, input)| match (*layer, *input) {
                (LayerDesc::Conv { maps, side }, Shape::Maps { maps: cin, .. }) => maps * cin * side * side + maps,
                (LayerDesc::Full { units }, s) => units * s.len() + units,
                _ => 0,
            })
            .sum()
    }
}

impl FromStr for ArchSpec {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, ArchError> {
        Self::parse(s)
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.input[0], self.input[1], self.input[2])?;
        for layer in &self.layers {
            match layer {
                LayerDesc::Conv { maps, side } => write!(f, "-{maps}C{side}")?,
                LayerDesc::Pool { window, stride } => write!(f, "-{window}P{stride}")?,
                LayerDesc::Full { units } => write!(f, "-{units}N")?,
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().enumerate().collect(),
            pos: 0,
            text,
        }
    }

    fn err<T>(&self, position: usize, msg: impl Into<String>) -> Result<T, ArchError> {
        Err(ArchError {
            position,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn int(&mut self, what: &str) -> Result<(usize, usize), ArchError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return match self.peek() {
                Some(c) => self.err(start, format!("expected {what}, found '{c}'")),
                None => self.err(start, format!("expected {what}, found end of input")),
            };
        }
        let digits: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        match digits.parse::<usize>() {
            Ok(v) => Ok((v, start)),
            Err(_) => self.err(start, format!("{what} '{digits}' is too large")),
        }
    }

    fn positive(&mut self, what: &str) -> Result<(usize, usize), ArchError> {
        let (v, at) = self.int(what)?;
        if v == 0 {
            return self.err(at, format!("{what} must be positive"));
        }
        Ok((v, at))
    }

    fn expect_x(&mut self) -> Result<(), ArchError> {
        match self.peek() {
            Some('x' | 'X' | '×') => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.err(self.pos, format!("expected 'x' between input dimensions, found '{c}'")),
            None => self.err(self.pos, "expected 'x' between input dimensions, found end of input"),
        }
    }

    fn parse(mut self) -> Result<ArchSpec, ArchError> {
        if self.text.trim().is_empty() {
            return self.err(0, "empty architecture string");
        }
        self.skip_ws();
        let (c, _) = self.positive("input channels")?;
        self.expect_x()?;
        let (h, _) = self.positive("input height")?;
        self.expect_x()?;
        let (w, _) = self.positive("input width")?;

        let mut layers = Vec::new();
        let mut shapes = vec![Shape::Maps { maps: c, h, w }];
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('-') => self.pos += 1,
                Some(ch) => return self.err(self.pos, format!("unexpected '{ch}', expected '-' before the next layer")),
            }
            self.skip_ws();
            let token_at = self.pos;
            let (n, n_at) = self.int("layer size")?;
            let kind_at = self.pos;
            let kind = self.peek();
            self.pos += 1;
            let layer = match kind {
                Some('C' | 'c') => {
                    let (side, _) = self.positive("filter side")?;
                    if n == 0 {
                        return self.err(n_at, "non-positive number of feature maps");
                    }
                    LayerDesc::Conv { maps: n, side }
                }
                Some('P' | 'p') => {
                    let (stride, stride_at) = self.positive("pool stride")?;
                    if n == 0 {
                        return self.err(n_at, "pool window must be positive");
                    }
                    if stride > n {
                        return self.err(stride_at, format!("pool stride {stride} exceeds window {n}"));
                    }
                    LayerDesc::Pool { window: n, stride }
                }
                Some('N' | 'n') => {
                    if n == 0 {
                        return self.err(n_at, "non-positive number of units");
                    }
                    LayerDesc::Full { units: n }
                }
                Some(ch) => return self.err(kind_at, format!("unknown layer kind '{ch}', expected C, P or N")),
                None => return self.err(kind_at, "layer kind missing after size, expected C, P or N"),
            };
            let prev = *shapes.last().expect("input shape present");
            let next = propagate(prev, layer, layers.last()).map_err(|msg| ArchError {
                position: token_at,
                msg,
            })?;
            layers.push(layer);
            shapes.push(next);
        }
        match layers.last() {
            None => self.err(self.chars.len(), "architecture needs at least one layer after the input dimensions"),
            Some(LayerDesc::Full { .. }) => Ok(ArchSpec {
                input: [c, h, w],
                layers,
                shapes,
            }),
            Some(_) => self.err(self.chars.len(), "last layer must be fully connected (N)"),
        }
    }
}

fn propagate(prev: Shape, layer: LayerDesc, prev_layer: Option<&LayerDesc>) -> Result<Shape, String> {
    match (layer, prev) {
        (LayerDesc::Conv { maps, side }, Shape::Maps { h, w, .. }) => {
            if side > h || side > w {
                return Err(format!("filter side {side} leaves no output on a {h}x{w} map (non-positive dimension)"));
            }
            Ok(Shape::Maps {
                maps,
                h: h - side + 1,
                w: w - side + 1,
            })
        }
        (LayerDesc::Pool { window, stride }, Shape::Maps { maps, h, w }) => {
            if !matches!(prev_layer, Some(LayerDesc::Conv { .. })) {
                return Err("pooling layer must follow a convolutional layer".into());
            }
            if window > h || window > w {
                return Err(format!("pool window {window} leaves no output on a {h}x{w} map (non-positive dimension)"));
            }
            Ok(Shape::Maps {
                maps,
                h: (h - window) / stride + 1,
                w: (w - window) / stride + 1,
            })
        }
        (LayerDesc::Full { units }, _) => Ok(Shape::Flat(units)),
        (_, Shape::Flat(_)) => Err("convolution or pooling cannot follow a fully-connected layer".into()),
    }
}
