"""Question phrasings and generation prompts used by the dataset builders."""

from __future__ import annotations

from datetime import date

REPORTGEN_QUESTIONS = (
    "Please provide the report for the following ECG.",
    "Give me the report of this ECG.",
    "I need a report on the following ECG.",
    "Could you send me the ECG report?",
    "Provide me with the report of this ECG.",
    "Please generate a report for the ECG below.",
    "I’d like to receive the report for this ECG.",
    "Can you share the report of the following ECG?",
    "Give me a detailed report on this ECG.",
    "May I have the official report for the ECG provided?",
)

# {abnormal} is replaced by the queried waveform class; the near-duplicate
# entry is intentional, the pool is sampled uniformly with replacement.
LOCALIZATION_QUESTIONS = (
    "Can you show me where the {abnormal} occurred on this ECG?",
    "Locate the {abnormal} on this ECG for me, please.",
    "Could you identify where the {abnormal} is on this ECG?",
    "Tell me where to find the {abnormal} on this ECG.",
    "Please locate the specific location of the {abnormal} on this ECG.",
    "Check this ECG and tell me where the {abnormal} appears.",
    "Determine where the {abnormal} is on this electrocardiogram.",
    "Help me find where the {abnormal} shows up on this ECG.",
    "Examine this ECG and point out where the {abnormal} is located.",
    "Assess this ECG and specify the location of the {abnormal}.",
    "Where does the {abnormal} appear in this ECG?",
    "On this ECG, where can I see the {abnormal}?",
    "Can you locate the {abnormal} on this ECG?",
    "Where is the {abnormal} located in this ECG?",
    "Locate the {abnormal} on this ECG for me, please.",
    "Could you point out where the {abnormal} is on this ECG?",
    "Where should I look to find the {abnormal} on this ECG?",
    "I need to find the {abnormal} on this ECG; where should I look?",
    "Help me locate the {abnormal} on this ECG.",
    "Determine where the {abnormal} is located on this electrocardiogram.",
)

ANSWER_PREFIX = "Report: "

BRIEF_SUFFIX = " Please answer briefly."

MULTIECG_PROMPT = """\
Based on the following ECGs, generate 8 different types of complex open-ended \
questions that require step-by-step thinking, and corresponding step-by-step \
answers. The following information is provided: the reports of each ECG and \
acquisition time. Questions should be about the ECG, in the question, you can \
choose to indicate the collection time of ECG or not. I need you to ask more \
questions. The more complex and diverse the question, the better. When the \
question q or answer a involves time, you need to provide the absolute or \
relative acquisition time of the ECG in the question.

For example, given reports:
[['Sinus tachycardia with PACs', 'Possible inferior infarct - age undetermined', \
'Abnormal ECG'], ['Sinus arrhythmia'], ['Sinus rhythm', 'Probable left ventricular \
hypertrophy']]
and acquisition time
['2148-11-12', '2149-06-06', '2149-12-24'],
[0, 205, 406] days,
generate the following questions:

q: Provide a report for each electrocardiogram
a: ECG1: Sinus tachycardia with PACs, possible inferior infarct - age undetermined, \
abnormal ECG. ECG2: Sinus arrhythmia. ECG3: Sinus rhythm, probable left ventricular \
hypertrophy.
q: What can be found by combining these ECGs
a: Combining these ECGs shows evolving cardiac patterns: initial tachycardia with \
possible infarct, followed by arrhythmia, then normalized rhythm with signs of left \
ventricular hypertrophy.
q: What changes occur in the ECGs
a: The ECGs show a shift from sinus tachycardia with PACs and possible infarct to \
sinus arrhythmia, then to normal sinus rhythm with probable left ventricular \
hypertrophy.
q: Possible trends in the future
a: Future ECGs may show progression of left ventricular hypertrophy or stabilization \
if underlying conditions are managed effectively.
q: These electrocardiograms were taken on 2148-11-12, 2149-06-06, and 2149-12-24. \
Please help me take a look
a: These ECGs from 2148-11-12 to 2149-12-24 show initial abnormalities, transient \
arrhythmia by mid-2149, and possible left ventricular hypertrophy by end of 2149.
q: The first ECG was collected 400 days ago, the second was collected 200 days ago, \
and the third was collected most recently. What changes have occurred?
a: Over the past 400 days, ECGs show improvement from sinus tachycardia and possible \
infarct to normal rhythm, with recent signs of left ventricular hypertrophy.

Given reports {reports}, and acquisition time {acquisition_time}, \
{acquisition_time_relative}, generate 8 different types of complex open-ended \
questions that require step-by-step thinking, and corresponding step-by-step \
answers. Format each QA pair in a single line as a JSON dictionary (key "q" for \
question, and "a" for answer). Do not include any other explanation.\
"""


def fill_multiecg_prompt(reports: list[list[str]], acquired: list[date]) -> str:
    """Fill the generation prompt with nested reports, dates, and day offsets."""
    if len(reports) != len(acquired):
        raise ValueError("one acquisition date per report list required")
    rel_days = [(d - acquired[0]).days for d in acquired]
    return MULTIECG_PROMPT.format(
        reports=repr([list(r) for r in reports]),
        acquisition_time=repr([d.isoformat() for d in acquired]),
        acquisition_time_relative=f"{rel_days!r} days",
    )
