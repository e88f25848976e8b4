use crate::timeline::{FrameRate, Rating, RatingScale, Timecode};

use super::{
    AnnotationLog, ChangeOutcome, LogHeader, RecordError, SamplingPolicy, TickOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// What happened to a slider step request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Moved,
    /// Accepted, but the slider was already at the end of the scale.
    AtBound,
    /// Playback is paused; ratings only change while the video plays.
    RejectedPaused,
}

impl StepOutcome {
    pub fn changed(self) -> bool {
        self == StepOutcome::Moved
    }
}

/// The slider as the annotator sees it: current rating, playback flag and
/// media position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliderState {
    current: Rating,
    playing: bool,
    playhead: Timecode,
    scale: RatingScale,
}

impl SliderState {
    /// Neutral rating, paused, at timecode zero.
    pub fn new(scale: RatingScale, rate: FrameRate) -> Self {
        SliderState {
            current: scale.neutral(),
            playing: false,
            playhead: Timecode::zero(rate),
            scale,
        }
    }

    pub fn current(&self) -> Rating {
        self.current
    }

    pub fn playing(&self) -> bool {
        self.playing
    }

    pub fn playhead(&self) -> Timecode {
        self.playhead
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    /// Moves one point in `direction` while playing; clamps at the ends.
    pub fn step(&self, direction: Direction) -> (SliderState, StepOutcome) {
        if !self.playing {
            return (self.clone(), StepOutcome::RejectedPaused);
        }
        let delta = match direction {
            Direction::Left => -1,
            Direction::Right => 1,
        };
        let next = self.scale.clamp(i64::from(self.current.value()) + delta);
        let outcome = if next == self.current {
            StepOutcome::AtBound
        } else {
            StepOutcome::Moved
        };
        (
            SliderState {
                current: next,
                ..self.clone()
            },
            outcome,
        )
    }

    pub fn toggle_playback(&self) -> SliderState {
        SliderState {
            playing: !self.playing,
            ..self.clone()
        }
    }

    pub fn seek(&self, playhead: Timecode) -> SliderState {
        SliderState {
            playhead,
            ..self.clone()
        }
    }

    /// Replaces the rating outright. Bypasses the one-step rule; meant for
    /// restoring a state, not for handling input.
    pub fn with_rating(&self, rating: Rating) -> SliderState {
        SliderState {
            current: rating,
            ..self.clone()
        }
    }
}

/// Events emitted by [`Annotator`] for the caller to surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotatorEvent {
    Ticked(usize),
    SeekBackwardIgnored { last: Timecode, playhead: Timecode },
}

/// Drives a slider and its log together, the way the dashboard does:
/// accepted moves are logged immediately (when the policy says so) and the
/// media clock produces interval records while playing.
#[derive(Debug, Clone)]
pub struct Annotator {
    state: SliderState,
    log: AnnotationLog,
    policy: SamplingPolicy,
}

impl Annotator {
    pub fn new(header: LogHeader, policy: SamplingPolicy) -> Self {
        let state = SliderState::new(header.scale.clone(), header.frame_rate);
        Annotator {
            state,
            log: AnnotationLog::start(header),
            policy,
        }
    }

    pub fn state(&self) -> &SliderState {
        &self.state
    }

    pub fn log(&self) -> &AnnotationLog {
        &self.log
    }

    pub fn into_log(self) -> AnnotationLog {
        self.log
    }

    pub fn toggle_playback(&mut self) {
        self.state = self.state.toggle_playback();
    }

    pub fn press(&mut self, direction: Direction) -> Result<StepOutcome, RecordError> {
        let (next, outcome) = self.state.step(direction);
        self.state = next;
        if outcome.changed() && self.policy.log_on_change() {
            match self.log.record_change(&self.state)? {
                ChangeOutcome::Appended | ChangeOutcome::Unchanged => {}
            }
        }
        Ok(outcome)
    }

    /// Advances the media clock. Backward moves are ignored and reported.
    pub fn advance_to(&mut self, playhead: Timecode) -> AnnotatorEvent {
        if playhead < self.state.playhead() {
            return AnnotatorEvent::SeekBackwardIgnored {
                last: self.state.playhead(),
                playhead,
            };
        }
        self.state = self.state.seek(playhead);
        if !self.state.playing() {
            return AnnotatorEvent::Ticked(0);
        }
        match self.log.record_tick(&self.state, &self.policy) {
            TickOutcome::Appended(n) => AnnotatorEvent::Ticked(n),
            TickOutcome::NotDue => AnnotatorEvent::Ticked(0),
            TickOutcome::Regressed { last, playhead } => {
                AnnotatorEvent::SeekBackwardIgnored { last, playhead }
            }
        }
    }
}
