from .fits import (
    HomFit,
    VisibilityUndefinedError,
    fit_hbt,
    fit_hom,
    fit_mi,
    fit_scan,
    fit_tcspc,
    hbt_initial_guess,
    visibility,
)
from .lm import DegenerateFitError, PreconditionError, nlls_fit, numeric_jacobian, propagate
from .models import (
    HBT_NAMES,
    TCSPC_NAMES,
    HbtFitParams,
    HomFitParams,
    TcspcFitParams,
    hbt_model,
    hom_models,
    tcspc_model,
)
