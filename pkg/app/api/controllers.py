from fastapi import APIRouter, HTTPException, status, Query
import numpy as np

from app.behavior.design import BEHAVIOR_PRESETS, behavior_preset
from app.errors import DeePCError
from app.integral.controller import INTEGRAL_PRESETS, configure_integral_converter

router = APIRouter(prefix="/api/controllers", tags=["controllers"])


def _preset_summary(name: str, N: int) -> dict:
    design = behavior_preset(name, N)
    return {
        "name": name,
        "alpha1": design.alpha1,
        "alpha2": design.alpha2,
        "alpha3": design.alpha3,
        "Q_Pomega_kernel": design.Q_Pomega[::N, ::N].tolist(),
        "Q_QV_kernel": design.Q_QV[::N, ::N].tolist(),
        "couples_frequency": bool(np.any(design.phi_gain)),
    }


@router.get("/presets")
async def list_presets(N: int = Query(10, ge=1, le=200)):
    """Behavior presets and integral wirings with their weight structure"""
    try:
        behaviors = [_preset_summary(name, N) for name in BEHAVIOR_PRESETS]
    except (DeePCError, ValueError) as e:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=str(e)
        )
    wirings = []
    for preset in INTEGRAL_PRESETS:
        wiring = configure_integral_converter(preset)
        wirings.append({
            "preset": preset,
            "inputs": list(wiring.input_channels),
            "integrated": list(wiring.mask.integrated),
            "keeps_inner_loops": wiring.keeps_inner_loops,
        })
    return {"N": N, "behaviors": behaviors, "integral": wirings}
