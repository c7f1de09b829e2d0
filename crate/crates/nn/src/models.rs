//! Fully convolutional surge models: a UNet and a plain convolutional stack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::NnError;
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub depth: usize,
    pub base_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub layers: usize,
    pub width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Unet(UNetConfig),
    Cnn(CnnConfig),
}

/// Name and logical shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    /// Number of inputs feeding one output unit, used for initialization.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Storage shape: logical dims padded with trailing ones.
    pub fn shape4(&self) -> [usize; 4] {
        let mut s = [1; 4];
        s[..self.dims.len()].copy_from_slice(&self.dims);
        s
    }

    pub fn is_bias(&self) -> bool {
        self.dims.len() == 1
    }
}

fn conv_specs(specs: &mut Vec<ParamSpec>, name: &str, cin: usize, cout: usize, k: usize) {
    specs.push(ParamSpec {
        name: format!("{name}.weight"),
        dims: vec![cout, cin, k, k],
        fan_in: cin * k * k,
    });
    specs.push(ParamSpec {
        name: format!("{name}.bias"),
        dims: vec![cout],
        fan_in: cin * k * k,
    });
}

fn up_specs(specs: &mut Vec<ParamSpec>, name: &str, cin: usize, cout: usize) {
    specs.push(ParamSpec {
        name: format!("{name}.weight"),
        dims: vec![cin, cout, 2, 2],
        fan_in: cin,
    });
    specs.push(ParamSpec {
        name: format!("{name}.bias"),
        dims: vec![cout],
        fan_in: cin,
    });
}

fn conv_count(cin: usize, cout: usize, k: usize) -> usize {
    cin * cout * k * k + cout
}

impl UNetConfig {
    pub fn new(depth: usize, base_width: usize, in_channels: usize, out_channels: usize) -> Self {
        Self { depth, base_width, in_channels, out_channels }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.depth == 0 || self.depth > 8 {
            return Err(NnError::Config(format!("unet depth {} outside 1..=8", self.depth)));
        }
        if self.base_width == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(NnError::Config("unet widths and channel counts must be positive".into()));
        }
        Ok(())
    }

    fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    /// Parameter count from the layer formula, independent of [`ParamSpec`] enumeration.
    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        let mut cin = self.in_channels;
        for i in 0..=self.depth {
            let c = self.width(i);
            total += conv_count(cin, c, 3) + conv_count(c, c, 3);
            cin = c;
        }
        for i in 0..self.depth {
            let c = self.width(i);
            total += 2 * c * c * 4 + c;
            total += conv_count(2 * c, c, 3) + conv_count(c, c, 3);
        }
        total + conv_count(self.base_width, self.out_channels, 1)
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut s = Vec::new();
        let mut cin = self.in_channels;
        for i in 0..self.depth {
            let c = self.width(i);
            conv_specs(&mut s, &format!("enc{i}.conv1"), cin, c, 3);
            conv_specs(&mut s, &format!("enc{i}.conv2"), c, c, 3);
            cin = c;
        }
        let cb = self.width(self.depth);
        conv_specs(&mut s, "bottleneck.conv1", cin, cb, 3);
        conv_specs(&mut s, "bottleneck.conv2", cb, cb, 3);
        for i in (0..self.depth).rev() {
            let c = self.width(i);
            up_specs(&mut s, &format!("dec{i}.up"), 2 * c, c);
            conv_specs(&mut s, &format!("dec{i}.conv1"), 2 * c, c, 3);
            conv_specs(&mut s, &format!("dec{i}.conv2"), c, c, 3);
        }
        conv_specs(&mut s, "head", self.base_width, self.out_channels, 1);
        s
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &mut Params<'_>, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        let mut skips = Vec::with_capacity(self.depth);
        for _ in 0..self.depth {
            h = conv_relu(tape, p, h)?;
            h = conv_relu(tape, p, h)?;
            skips.push(h);
            h = tape.maxpool2d(h, 2)?;
        }
        h = conv_relu(tape, p, h)?;
        h = conv_relu(tape, p, h)?;
        for skip in skips.into_iter().rev() {
            let (w, b) = p.pair()?;
            h = tape.conv_transpose2d(h, w, Some(b), 2)?;
            h = tape.concat_channels(skip, h)?;
            h = conv_relu(tape, p, h)?;
            h = conv_relu(tape, p, h)?;
        }
        let (w, b) = p.pair()?;
        tape.conv2d(h, w, Some(b), 1, 0)
    }
}

impl CnnConfig {
    pub fn new(layers: usize, width: usize, in_channels: usize, out_channels: usize) -> Self {
        Self { layers, width, in_channels, out_channels }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.width == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(NnError::Config("cnn widths and channel counts must be positive".into()));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        if self.layers == 0 {
            return conv_count(self.in_channels, self.out_channels, 1);
        }
        conv_count(self.in_channels, self.width, 3)
            + (self.layers - 1) * conv_count(self.width, self.width, 3)
            + conv_count(self.width, self.out_channels, 1)
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        let mut s = Vec::new();
        let mut cin = self.in_channels;
        for i in 0..self.layers {
            conv_specs(&mut s, &format!("conv{i}"), cin, self.width, 3);
            cin = self.width;
        }
        conv_specs(&mut s, "head", cin, self.out_channels, 1);
        s
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &mut Params<'_>, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        for _ in 0..self.layers {
            h = conv_relu(tape, p, h)?;
        }
        let (w, b) = p.pair()?;
        tape.conv2d(h, w, Some(b), 1, 0)
    }
}

/// Sequential cursor over parameter variables in [`Architecture::param_specs`] order.
struct Params<'a> {
    vars: &'a [Var],
    next: usize,
}

impl Params<'_> {
    fn pair(&mut self) -> Result<(Var, Var), NnError> {
        if self.next + 2 > self.vars.len() {
            return Err(NnError::Shape(format!(
                "model needs more than {} parameter tensors",
                self.vars.len()
            )));
        }
        let pair = (self.vars[self.next], self.vars[self.next + 1]);
        self.next += 2;
        Ok(pair)
    }
}

fn conv_relu<T: Scalar>(tape: &mut Tape<T>, p: &mut Params<'_>, x: Var) -> Result<Var, NnError> {
    let (w, b) = p.pair()?;
    let y = tape.conv2d(x, w, Some(b), 1, 1)?;
    tape.relu(y)
}

impl Architecture {
    pub fn validate(&self) -> Result<(), NnError> {
        match self {
            Architecture::Unet(c) => c.validate(),
            Architecture::Cnn(c) => c.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Unet(_) => "unet",
            Architecture::Cnn(_) => "cnn",
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Architecture::Unet(c) => c.in_channels,
            Architecture::Cnn(c) => c.in_channels,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Architecture::Unet(c) => c.out_channels,
            Architecture::Cnn(c) => c.out_channels,
        }
    }

    /// Spatial dimensions must be a multiple of this.
    pub fn spatial_multiple(&self) -> usize {
        match self {
            Architecture::Unet(c) => 1 << c.depth,
            Architecture::Cnn(_) => 1,
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            Architecture::Unet(c) => c.param_specs(),
            Architecture::Cnn(c) => c.param_specs(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Architecture::Unet(c) => c.parameter_count(),
            Architecture::Cnn(c) => c.parameter_count(),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("architecture serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn check_input(&self, shape: [usize; 4]) -> Result<(), NnError> {
        let [_, c, h, w] = shape;
        if c != self.in_channels() {
            return Err(NnError::Shape(format!(
                "{} expects {} input channels, got {c}",
                self.name(),
                self.in_channels()
            )));
        }
        let m = self.spatial_multiple();
        if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
            return Err(NnError::Shape(format!(
                "{} input {h}x{w} must be a nonzero multiple of {m}",
                self.name()
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `tape`. `params` follows [`Self::param_specs`].
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var, NnError> {
        self.check_input(tape.value(x).shape())?;
        let specs = self.param_specs();
        if params.len() != specs.len() {
            return Err(NnError::Shape(format!(
                "{} expects {} parameter tensors, got {}",
                self.name(),
                specs.len(),
                params.len()
            )));
        }
        for (spec, &v) in specs.iter().zip(params) {
            if tape.value(v).shape() != spec.shape4() {
                return Err(NnError::Shape(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    spec.name,
                    tape.value(v).shape(),
                    spec.dims
                )));
            }
        }
        let mut cursor = Params { vars: params, next: 0 };
        let y = match self {
            Architecture::Unet(c) => c.forward(tape, &mut cursor, x)?,
            Architecture::Cnn(c) => c.forward(tape, &mut cursor, x)?,
        };
        debug_assert_eq!(cursor.next, params.len());
        Ok(y)
    }
}

/// Parameter tensors of a model, in [`Architecture::param_specs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    pub architecture: Architecture,
    pub tensors: Vec<Tensor4<T>>,
}

impl<T: Scalar> ModelParameters<T> {
    /// Kaiming-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases.
    pub fn init(architecture: Architecture, seed: u64) -> Result<Self, NnError> {
        architecture.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = architecture
            .param_specs()
            .iter()
            .map(|spec| {
                if spec.is_bias() {
                    Tensor4::zeros(spec.shape4())
                } else {
                    let bound = (6.0 / spec.fan_in as f64).sqrt();
                    let data = (0..spec.numel())
                        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
                        .collect();
                    Tensor4::from_vec(spec.shape4(), data).expect("spec shape")
                }
            })
            .collect();
        Ok(Self { architecture, tensors })
    }

    pub fn from_tensors(architecture: Architecture, tensors: Vec<Tensor4<T>>) -> Result<Self, NnError> {
        architecture.validate()?;
        let specs = architecture.param_specs();
        if specs.len() != tensors.len() {
            return Err(NnError::Shape(format!(
                "expected {} parameter tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (s, t) in specs.iter().zip(&tensors) {
            if t.shape() != s.shape4() {
                return Err(NnError::Shape(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    s.name,
                    t.shape(),
                    s.dims
                )));
            }
        }
        Ok(Self { architecture, tensors })
    }

    pub fn cast<U: Scalar>(&self) -> ModelParameters<U> {
        ModelParameters {
            architecture: self.architecture,
            tensors: self.tensors.iter().map(Tensor4::cast).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor4::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor4::is_finite)
    }

    /// Places all tensors on `tape` as trainable leaves.
    pub fn attach(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }

    /// Inference on a batch `(n, c, h, w)`.
    pub fn predict(&self, x: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        let xv = tape.constant(x.clone());
        let y = self.architecture.forward(&mut tape, &vars, xv)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unet_count_matches_enumeration() {
        for depth in 1..=5 {
            for &w in &[1usize, 4, 8, 64] {
                let cfg = UNetConfig::new(depth, w, 41, 1);
                let arch = Architecture::Unet(cfg);
                let enumerated: usize = arch.param_specs().iter().map(ParamSpec::numel).sum();
                assert_eq!(enumerated, cfg.parameter_count(), "depth {depth} width {w}");
            }
        }
    }

    #[test]
    fn cnn_count_matches_enumeration() {
        for layers in 0..4 {
            let cfg = CnnConfig::new(layers, 16, 41, 1);
            let enumerated: usize = Architecture::Cnn(cfg).param_specs().iter().map(ParamSpec::numel).sum();
            assert_eq!(enumerated, cfg.parameter_count());
        }
    }

    #[test]
    fn unet_preserves_spatial_shape() {
        let arch = Architecture::Unet(UNetConfig::new(2, 2, 3, 1));
        let params = ModelParameters::<f32>::init(arch, 1).unwrap();
        let y = params.predict(&Tensor4::filled([2, 3, 8, 12], 0.5)).unwrap();
        assert_eq!(y.shape(), [2, 1, 8, 12]);
        assert!(y.is_finite());
    }

    #[test]
    fn indivisible_input_is_rejected() {
        let arch = Architecture::Unet(UNetConfig::new(3, 2, 3, 1));
        let params = ModelParameters::<f32>::init(arch, 1).unwrap();
        let err = params.predict(&Tensor4::zeros([1, 3, 12, 16])).unwrap_err();
        assert!(matches!(err, NnError::Shape(m) if m.contains("multiple of 8")));
        assert!(params.predict(&Tensor4::zeros([1, 2, 16, 16])).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = Architecture::Unet(UNetConfig::new(2, 4, 5, 1));
        let a = ModelParameters::<f32>::init(arch, 7).unwrap();
        let b = ModelParameters::<f32>::init(arch, 7).unwrap();
        let c = ModelParameters::<f32>::init(arch, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (spec, t) in arch.param_specs().iter().zip(&a.tensors) {
            let bound = (6.0 / spec.fan_in as f64).sqrt() as f32;
            if spec.is_bias() {
                assert!(t.data.iter().all(|&v| v == 0.0));
            } else {
                assert!(t.data.iter().all(|&v| v.abs() <= bound));
            }
        }
    }

    #[test]
    fn fingerprint_distinguishes_configurations() {
        let a = Architecture::Unet(UNetConfig::new(3, 8, 41, 1));
        let b = Architecture::Unet(UNetConfig::new(3, 16, 41, 1));
        assert_eq!(a.fingerprint(), a.fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn parameter_names_are_unique() {
        let specs = Architecture::Unet(UNetConfig::new(4, 2, 41, 1)).param_specs();
        let mut names: Vec<_> = specs.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), specs.len());
    }
}
