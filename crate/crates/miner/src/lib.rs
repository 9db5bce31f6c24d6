// SPDX-License-Identifier: Apache-2.0

//! Command-line front end and HTTP session service for the remark miner.

pub mod api;
pub mod cli;
pub mod numbers;
pub mod session;
