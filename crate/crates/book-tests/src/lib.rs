//! Runs the code listings of the guide in `book/` as doctests.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/forms.md")]
pub struct Forms;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/grassmann.md")]
pub struct Grassmann;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/spaces.md")]
pub struct Spaces;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/immersions.md")]
pub struct Immersions;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/principles.md")]
pub struct Principles;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
pub struct Experiments;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/checking.md")]
pub struct Checking;
