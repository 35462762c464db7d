//! The upscaling generator: a 3x3 head, a chain of self-calibrated
//! blocks under one long residual skip, then stride-2 transposed-conv
//! stages that double the resolution log2(scale) times, and a 3x3 tail
//! squashed into [0, 1] by a sigmoid.

use crate::error::{Error, Result};
use crate::rng;
use crate::scconv::{sc_block, ConvParams, ScBlockParams, DEFAULT_R_POOL, PRELU_INIT};
use crate::tensor::tape::{ParamBundle, Parameter, Tape, Var};
use crate::tensor::{Shape, Tensor};

/// Architecture knobs. Defaults are the full-size model; tests use
/// much smaller values through the same struct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    /// Upscaling factor, one of 2, 4, 8.
    pub scale: usize,
    /// Number of self-calibrated blocks between head and skip.
    pub n_sc_blocks: usize,
    /// Feature width; must be even so blocks can split channels.
    pub base_channels: usize,
    /// Pooling rate inside each block's calibration branch.
    pub r_pool: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { scale: 4, n_sc_blocks: 4, base_channels: 64, r_pool: DEFAULT_R_POOL }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.scale) {
            return Err(Error::InvalidArgument {
                op: "generator_config",
                detail: format!("scale {} not in {{2, 4, 8}}", self.scale),
            });
        }
        if self.base_channels == 0 || self.base_channels % 2 != 0 {
            return Err(Error::InvalidArgument {
                op: "generator_config",
                detail: format!("base_channels {} must be positive and even", self.base_channels),
            });
        }
        if self.n_sc_blocks == 0 || self.r_pool == 0 {
            return Err(Error::InvalidArgument {
                op: "generator_config",
                detail: "n_sc_blocks and r_pool must be positive".into(),
            });
        }
        Ok(())
    }

    /// Number of stride-2 reconstruction stages.
    pub fn up_stages(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }

    /// Inputs must have H and W divisible by this.
    pub fn input_multiple(&self) -> usize {
        self.r_pool
    }

    /// Flat key=value rendering, embedded in checkpoints so a file
    /// can refuse to load into a differently shaped model.
    pub fn echo(&self) -> String {
        format!(
            "kind = generator\nscale = {}\nn_sc_blocks = {}\nbase_channels = {}\nr_pool = {}\n",
            self.scale, self.n_sc_blocks, self.base_channels, self.r_pool
        )
    }

    /// Parses the `echo` rendering back, so a checkpoint alone is
    /// enough to rebuild a compatible model.
    pub fn from_echo(text: &str) -> Result<Self> {
        let mut flat = crate::config::FlatConfig::parse(text)?;
        match flat.take_str("kind") {
            Some(k) if k == "generator" => {}
            Some(k) => {
                return Err(Error::Config(format!("expected kind = generator, found `{k}`")))
            }
            None => return Err(Error::Config("missing `kind` in model config".into())),
        }
        let mut cfg = GeneratorConfig::default();
        flat.take_into("scale", &mut cfg.scale)?;
        flat.take_into("n_sc_blocks", &mut cfg.n_sc_blocks)?;
        flat.take_into("base_channels", &mut cfg.base_channels)?;
        flat.take_into("r_pool", &mut cfg.r_pool)?;
        flat.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// All learnable state of the generator.
#[derive(Clone, Debug)]
pub struct Generator {
    pub config: GeneratorConfig,
    head: ConvParams,
    blocks: Vec<ScBlockParams>,
    up_convs: Vec<ConvParams>,
    up_slopes: Vec<Parameter>,
    tail: ConvParams,
}

impl Generator {
    /// Deterministic seeded init; every layer draws from a stream
    /// derived from its own name.
    pub fn init(config: &GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let ch = config.base_channels;
        let head = ConvParams::init(
            "generator.head",
            Shape::new(ch, 3, 3, 3),
            rng::derive(seed, "generator.head"),
        );
        let blocks = (0..config.n_sc_blocks)
            .map(|i| {
                let name = format!("generator.block{i}");
                ScBlockParams::init(ch, config.r_pool, &name, rng::derive(seed, &name))
            })
            .collect();
        let mut up_convs = Vec::new();
        let mut up_slopes = Vec::new();
        for i in 0..config.up_stages() {
            let name = format!("generator.up{i}");
            up_convs.push(ConvParams::init_transposed(
                &name,
                Shape::new(ch, ch, 4, 4),
                rng::derive(seed, &name),
            ));
            up_slopes.push(Parameter::new(format!("{name}.act"), Tensor::scalar(PRELU_INIT)));
        }
        let tail = ConvParams::init(
            "generator.tail",
            Shape::new(3, ch, 3, 3),
            rng::derive(seed, "generator.tail"),
        );
        Ok(Generator { config: config.clone(), head, blocks, up_convs, up_slopes, tail })
    }

    /// Forward pass on a tape. Input is Nx3xHxW with H, W divisible by
    /// the block pooling rate; output is Nx3x(scale*H)x(scale*W).
    pub fn forward(&self, tape: &Tape, x: Var) -> Result<Var> {
        let s = tape.shape(x);
        if s.c != 3 {
            return Err(Error::ShapeMismatch {
                op: "generator_forward",
                detail: format!("expected 3 input channels, got {}", s.c),
            });
        }
        let m = self.config.input_multiple();
        if s.h % m != 0 || s.w % m != 0 {
            return Err(Error::InvalidArgument {
                op: "generator_forward",
                detail: format!("input {}x{} must be a multiple of {m}", s.h, s.w),
            });
        }
        let (hw, hb) = self.head.bind(tape);
        let head_out = tape.conv2d(x, hw, Some(hb), 1, 1)?;
        let mut h = head_out;
        for block in &self.blocks {
            h = sc_block(tape, h, block)?;
        }
        // Long skip: reconstruction sees features plus the raw head
        // output, so blocks only need to learn a correction.
        h = tape.add(h, head_out)?;
        for (conv, slope) in self.up_convs.iter().zip(&self.up_slopes) {
            let (w, b) = conv.bind(tape);
            h = tape.conv2d_transposed(h, w, Some(b), 2, 1)?;
            let sv = tape.param(slope);
            h = tape.prelu(h, sv)?;
        }
        let (tw, tb) = self.tail.bind(tape);
        let pre = tape.conv2d(h, tw, Some(tb), 1, 1)?;
        tape.sigmoid(pre)
    }

    /// Forward pass without gradient tracking: records on a throwaway
    /// tape and returns the value.
    pub fn forward_value(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let y = self.forward(&tape, xv)?;
        Ok(tape.value(y))
    }
}

impl ParamBundle for Generator {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = self.head.params();
        for b in &self.blocks {
            out.extend(b.params());
        }
        for (c, s) in self.up_convs.iter().zip(&self.up_slopes) {
            out.extend(c.params());
            out.push(s);
        }
        out.extend(self.tail.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.head.params_mut();
        for b in &mut self.blocks {
            out.extend(b.params_mut());
        }
        for (c, s) in self.up_convs.iter_mut().zip(&mut self.up_slopes) {
            out.extend(c.params_mut());
            out.push(s);
        }
        out.extend(self.tail.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(scale: usize) -> GeneratorConfig {
        GeneratorConfig { scale, n_sc_blocks: 1, base_channels: 8, r_pool: 2 }
    }

    #[test]
    fn echo_round_trips_through_from_echo() {
        for cfg in [GeneratorConfig::default(), tiny_config(2), tiny_config(8)] {
            assert_eq!(GeneratorConfig::from_echo(&cfg.echo()).unwrap(), cfg);
        }
        assert!(GeneratorConfig::from_echo("scale = 4\n").is_err(), "missing kind");
        assert!(GeneratorConfig::from_echo(&format!("{}bogus = 1\n", tiny_config(2).echo())).is_err());
    }

    fn rand_input(seed: u64, h: usize, w: usize) -> Tensor {
        let mut r = rng::seeded(seed);
        rng::uniform_tensor(Shape::new(1, 3, h, w), 0.0, 1.0, &mut r)
    }

    #[test]
    fn output_dimensions_follow_the_scale() {
        for scale in [2usize, 4, 8] {
            let g = Generator::init(&tiny_config(scale), 1).unwrap();
            let y = g.forward_value(&rand_input(0, 8, 6)).unwrap();
            assert_eq!(y.shape(), Shape::new(1, 3, 8 * scale, 6 * scale));
        }
    }

    #[test]
    fn full_size_config_emits_four_x() {
        let cfg = GeneratorConfig::default();
        let g = Generator::init(&cfg, 7).unwrap();
        let y = g.forward_value(&rand_input(3, 8, 8)).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 3, 32, 32));
    }

    #[test]
    fn outputs_live_in_the_unit_interval() {
        let g = Generator::init(&tiny_config(2), 42).unwrap();
        let y = g.forward_value(&rand_input(9, 8, 8)).unwrap();
        for &v in y.data() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn zero_input_is_finite_after_init() {
        let g = Generator::init(&tiny_config(4), 5).unwrap();
        let y = g.forward_value(&Tensor::zeros(Shape::new(1, 3, 4, 4))).unwrap();
        assert!(y.is_finite());
    }

    #[test]
    fn scale_two_and_four_differ_by_exactly_one_stage() {
        let g2 = Generator::init(&tiny_config(2), 0).unwrap();
        let g4 = Generator::init(&tiny_config(4), 0).unwrap();
        let ch = 8usize;
        let stage = ch * ch * 4 * 4 + ch + 1; // weight + bias + slope
        assert_eq!(g4.param_count() - g2.param_count(), stage);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = Generator::init(&tiny_config(2), 11).unwrap();
        let b = Generator::init(&tiny_config(2), 11).unwrap();
        let c = Generator::init(&tiny_config(2), 12).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(pa.name, pb.name);
            assert_eq!(pa.value.data(), pb.value.data(), "{}", pa.name);
        }
        let head_a = &a.params()[0];
        let head_c = &c.params()[0];
        assert!(head_a.value.max_abs_diff(&head_c.value).unwrap() > 0.0);
    }

    #[test]
    fn init_variance_tracks_fan_in_on_a_large_layer() {
        let g = Generator::init(&GeneratorConfig::default(), 3).unwrap();
        // The first reconstruction stage is 64x64x4x4: fan_in 1024.
        let w = &g.up_convs[0].weight.value;
        let n = w.len() as f64;
        let mean: f64 = w.data().iter().sum::<f64>() / n;
        let var: f64 = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let want = 2.0 / 1024.0;
        assert!(
            (var - want).abs() / want < 0.10,
            "variance {var:e} vs expected {want:e}"
        );
    }

    #[test]
    fn indivisible_inputs_and_bad_configs_are_rejected() {
        let g = Generator::init(&tiny_config(2), 0).unwrap();
        let err = g.forward_value(&rand_input(0, 7, 8)).unwrap_err();
        assert!(err.to_string().contains("multiple of 2"), "{err}");
        assert!(Generator::init(
            &GeneratorConfig { scale: 3, ..tiny_config(2) },
            0
        )
        .is_err());
        assert!(Generator::init(
            &GeneratorConfig { base_channels: 7, ..tiny_config(2) },
            0
        )
        .is_err());
    }

    #[test]
    fn config_echo_distinguishes_scales() {
        assert_ne!(tiny_config(2).echo(), tiny_config(4).echo());
    }
}
