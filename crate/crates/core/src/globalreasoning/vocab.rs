//! Entity, alias and event vocabularies.

pub const CITIES: &[&str] = &[
    "City_A",
    "City_B",
    "City_C",
    "City_D",
    "City_E",
    "Nova_Prime",
    "Zion",
    "Matrix",
];

pub const VARIABLES: &[&str] = &[
    "sys_timeout",
    "db_port",
    "cache_size",
    "max_retries",
    "log_level",
    "worker_count",
];

/// Substitution names shared by both task types.
pub const ALIASES: &[&str] = &[
    "Code-Alpha",
    "Code-Beta",
    "Code-Gamma",
    "Omega-Protocol",
    "Sector-X",
    "Phantom-9",
    "Alias-77",
    "Echo-Base",
    "Node-Zero",
    "Cluster-V",
];

/// Event designations for the statistics task.
pub const EVENTS: &[&str] = &[
    "Operation 77-B",
    "Protocol X-9",
    "Class-IV atmospheric disturbance",
    "Category-B logical paradox",
    "encrypted telemetry burst",
];

/// Parameter descriptors for the variable tracking task.
pub const DESCRIPTORS: &[&str] = &[
    "core engine parameter",
    "registry key 0x0FA",
    "subsystem coefficient",
    "thread pool minimum size",
    "encryption cipher strength",
];
