use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BoundingBox, Image};
use crate::scene::{MicroscopeOptics, MicroscopeState, SharpMicroscopeView};

/// Discrete Laplacian used by the focus measure.
pub const FOCUS_KERNEL: [[i32; 3]; 3] = [[0, 1, 0], [1, -4, 1], [0, 1, 0]];

/// Variance of the Laplacian response over `roi`, pooled across the three
/// channels. The convolution reads the whole image with replicated borders.
pub fn focus_score(img: &Image, roi: &BoundingBox) -> Result<f64> {
    if !roi.fits(img.width(), img.height()) {
        return Err(Error::Domain(format!(
            "focus roi {roi:?} outside {}×{} image",
            img.width(),
            img.height()
        )));
    }
    if roi.area() < 9 {
        return Err(Error::Domain(format!("focus roi area {} below 9 px", roi.area())));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let at = |x: usize, y: usize, k: usize| i64::from(raw[(y * w + x) * 3 + k]);
    let (mut sum, mut sq) = (0i64, 0i128);
    for y in roi.v_min as usize..roi.v_max as usize {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in roi.u_min as usize..roi.u_max as usize {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            for k in 0..3 {
                let l = at(x, up, k) + at(x, down, k) + at(left, y, k) + at(right, y, k) - 4 * at(x, y, k);
                sum += l;
                sq += i128::from(l * l);
            }
        }
    }
    let n = i128::from(roi.area() as i64) * 3;
    let s = i128::from(sum);
    Ok((n * sq - s * s) as f64 / (n * n) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutofocusParams {
    /// Focus score accepted as sharp.
    pub threshold: f64,
    /// Zoom dial travel per step at zero score.
    pub gain: f64,
    pub max_steps: usize,
}

impl Default for AutofocusParams {
    fn default() -> Self {
        Self {
            threshold: 50.0,
            gain: 0.08,
            max_steps: 100,
        }
    }
}

impl AutofocusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.gain > 0.0 && self.max_steps > 0) {
            return Err(Error::Config("autofocus: threshold, gain and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Hill-climbing state carried between autofocus steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocusSearch {
    /// Sign of the next zoom change; starts towards shorter focal distances.
    pub direction: f64,
    /// Step multiplier, halved at every reversal.
    pub scale: f64,
    pub previous: Option<f64>,
    pub bounced: bool,
}

impl Default for FocusSearch {
    fn default() -> Self {
        Self {
            direction: -1.0,
            scale: 1.0,
            previous: None,
            bounced: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FocusCommand {
    /// Sharp enough; keep the dial where it is.
    Hold,
    /// Change the zoom dial by this amount.
    Adjust(f64),
    /// Both dial ends were hit without reaching the threshold.
    Exhausted,
}

/// One proportional hill-climbing step on the zoom dial. The step shrinks
/// as the score approaches `threshold`; a falling score reverses direction
/// and halves the step; hitting a dial end bounces once.
pub fn autofocus_step(
    score: f64,
    state: &MicroscopeState,
    search: &mut FocusSearch,
    params: &AutofocusParams,
) -> FocusCommand {
    if score >= params.threshold {
        return FocusCommand::Hold;
    }
    if search.previous.is_some_and(|p| score < p) {
        search.direction = -search.direction;
        search.scale *= 0.5;
    }
    search.previous = Some(score);
    let pushing_limit = (state.zoom() <= 0.0 && search.direction < 0.0) || (state.zoom() >= 1.0 && search.direction > 0.0);
    if pushing_limit {
        if search.bounced {
            return FocusCommand::Exhausted;
        }
        search.bounced = true;
        search.direction = -search.direction;
    }
    let delta = params.gain * search.scale * search.direction * (params.threshold - score) / params.threshold;
    FocusCommand::Adjust(delta)
}

#[derive(Clone, Debug)]
pub struct AutofocusResult {
    pub state: MicroscopeState,
    pub score: f64,
    pub steps: usize,
    pub converged: bool,
    pub image: Image,
}

/// Runs [`autofocus_step`] on a sharp view until the score over `roi`
/// reaches the threshold, the dial is exhausted or `max_steps` is spent.
pub fn autofocus(
    view: &SharpMicroscopeView,
    roi: &BoundingBox,
    start: MicroscopeState,
    optics: &MicroscopeOptics,
    params: &AutofocusParams,
) -> Result<AutofocusResult> {
    params.validate()?;
    let mut state = start;
    let mut search = FocusSearch::default();
    let mut steps = 0;
    loop {
        let image = view.focused(&state, optics);
        let score = focus_score(&image, roi)?;
        let done = |converged| AutofocusResult {
            state,
            score,
            steps,
            converged,
            image: image.clone(),
        };
        if steps >= params.max_steps {
            return Ok(done(score >= params.threshold));
        }
        match autofocus_step(score, &state, &mut search, params) {
            FocusCommand::Hold => return Ok(done(true)),
            FocusCommand::Exhausted => return Ok(done(false)),
            FocusCommand::Adjust(delta) => state = state.with_zoom(state.zoom() + delta),
        }
        steps += 1;
    }
}
