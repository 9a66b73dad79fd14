"""Dataset builders: report QA, localization QA, multi-ECG QA, subsetting."""

from .localization import (
    LocalizationStats,
    build_localization,
    merge_class_regions,
)
from .multiecg import (
    PAIRS_PER_PATIENT,
    MultiEcgStats,
    PatientGroup,
    PatientRecord,
    build_multiecg,
    subset_ecgqa,
)
from .reportgen import DEFAULT_STOP_PHRASES, BuildStats, build_reportgen, clean_report
from .samples import (
    SCHEMA_NAME,
    SCHEMA_VERSION,
    EcgRef,
    QaSample,
    read_samples,
    split_by_record,
    write_samples,
)
from .templates import (
    ANSWER_PREFIX,
    BRIEF_SUFFIX,
    LOCALIZATION_QUESTIONS,
    MULTIECG_PROMPT,
    REPORTGEN_QUESTIONS,
    fill_multiecg_prompt,
)

__all__ = [
    "ANSWER_PREFIX",
    "BRIEF_SUFFIX",
    "BuildStats",
    "DEFAULT_STOP_PHRASES",
    "EcgRef",
    "LOCALIZATION_QUESTIONS",
    "LocalizationStats",
    "MULTIECG_PROMPT",
    "MultiEcgStats",
    "PAIRS_PER_PATIENT",
    "PatientGroup",
    "PatientRecord",
    "QaSample",
    "REPORTGEN_QUESTIONS",
    "SCHEMA_NAME",
    "SCHEMA_VERSION",
    "build_localization",
    "build_multiecg",
    "build_reportgen",
    "clean_report",
    "fill_multiecg_prompt",
    "merge_class_regions",
    "read_samples",
    "split_by_record",
    "subset_ecgqa",
    "write_samples",
]
