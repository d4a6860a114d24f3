from datetime import datetime
import traceback

USAGE_ERROR = "usage"
GROUP_SPEC_ERROR = "group-spec"
SHAPE_ERROR = "shape"
BUDGET_ERROR = "budget"
SPECTRAL_GAP_ERROR = "spectral-gap"
SAMPLING_ERROR = "sampling"

CONTACT_DEV = "If this error persists, please open an issue with the command line and input files."

# kinds that are numerical guards rather than caller mistakes
NUMERICAL_GUARDS = (BUDGET_ERROR, SPECTRAL_GAP_ERROR, SAMPLING_ERROR)

ERROR_MAPPER = {
    USAGE_ERROR:
        "The command line or an input file could not be used. Check the flags and the loop/plaquette JSON files.",
    GROUP_SPEC_ERROR:
        ("Unsupported group. Families are so (N>=2), sp (N>=1), u (N>=1), su (N>=2), g2 and u1 "
         "(where N is the character exponent)."),
    SHAPE_ERROR:
        "Array extents do not match. Every coefficient must be d x d with d the representation dimension.",
    BUDGET_ERROR:
        ("The tensor representation is larger than the configured budget. Lower the loop degree "
         "or raise --budget if the machine has the memory."),
    SPECTRAL_GAP_ERROR:
        ("The tensor Casimir has an eigenvalue too close to zero to classify. Tighten the null-space "
         "cutoff (--tol) and try again."),
    SAMPLING_ERROR:
        "The Monte-Carlo estimate has no usable weight. Increase --samples or lower beta.",
}


class LgmError(Exception):
    kind = "error"

    def __init__(self, detail, **info):
        super().__init__(detail)
        self.detail = detail
        self.info = info


class UsageError(LgmError, ValueError):
    kind = USAGE_ERROR


class GroupSpecError(LgmError, ValueError):
    kind = GROUP_SPEC_ERROR


class ShapeError(LgmError, ValueError):
    kind = SHAPE_ERROR


class BudgetExceededError(LgmError):
    kind = BUDGET_ERROR

    def __init__(self, required, budget):
        super().__init__(
            f"tensor representation needs dimension {required}, budget is {budget}",
            required=required, budget=budget)
        self.required = required
        self.budget = budget


class SpectralGapError(LgmError):
    kind = SPECTRAL_GAP_ERROR

    def __init__(self, gap, cutoff, factor=10):
        super().__init__(
            f"smallest nonzero |eigenvalue| {gap:.3e} is within {factor:g}x of the null-space cutoff {cutoff:.3e}",
            gap=gap, cutoff=cutoff, factor=factor)
        self.gap = gap
        self.cutoff = cutoff
        self.factor = factor


class SamplingError(LgmError):
    kind = SAMPLING_ERROR


def check_budget(required, budget):
    if required > budget:
        raise BudgetExceededError(required, budget)


def exit_code(exception):
    kind = getattr(exception, "kind", None)
    if kind in NUMERICAL_GUARDS:
        return 1
    return 2


def error_document(exception):
    kind = getattr(exception, "kind", USAGE_ERROR)
    document = {"kind": kind, "detail": str(exception)}
    if kind in ERROR_MAPPER:
        document["hint"] = ERROR_MAPPER[kind]
    info = getattr(exception, "info", None)
    if info:
        document.update(info)
    return {"error": document}


def error_text(process_method, exception):

    traceback_text = "".join(traceback.format_tb(exception.__traceback__))
    message = f'{type(exception).__name__}: "{exception}"\nTraceback Error: "\n{traceback_text}"\n'
    error_message = f'\n\nRaw Error Details:\n\n{message}\nError Time Stamp [{datetime.now().strftime("%Y-%m-%d %H:%M:%S")}]\n'
    process = f"Last Error Received:\n\nProcess: {process_method}\n\n"

    final_message = ERROR_MAPPER.get(getattr(exception, "kind", None), CONTACT_DEV)

    return f"{process}{final_message}{error_message}"
