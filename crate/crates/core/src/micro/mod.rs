//! Microscope scope: focus measure and autofocus, stigma centering, the
//! contact motion plan and pollen inspection around the buzz loop.

mod center;
mod contact;
mod focus;
mod pollen;

pub use center::{find_flower_center, EllipseFit, MIN_STIGMA_PIXELS, STIGMA_BAND};
pub use contact::{
    centering_step, final_approach, is_captured, lateral_offset, plan_contact, CenteringCommand, CenteringParams,
    ContactPlan, MotionPrimitive,
};
pub use focus::{
    autofocus, autofocus_step, focus_score, AutofocusParams, AutofocusResult, FocusCommand, FocusSearch, FOCUS_KERNEL,
};
pub use pollen::{
    count_pollen, count_pollen_with, pollination_loop, InspectionResult, PollinationOutcome, PollinationParams,
    TissueFilter, POLLEN_BAND, TISSUE_BAND,
};
