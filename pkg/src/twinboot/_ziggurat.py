"""Tables for a 256-layer ziggurat sampler of the standard normal.

Both kernel backends consume these exact arrays, so a given bit generator
state yields bit-identical normals from either backend. Layer 0 is the base
strip plus tail; a 64-bit draw supplies the layer (8 bits), the sign (1 bit)
and a 52-bit abscissa.
"""
import math

import numpy as np

N_LAYERS = 256
R = 3.6541528853610088
INV_R = 1.0 / R
VOLUME = 4.92867323399e-3
MASK52 = (1 << 52) - 1
_M = float(1 << 52)


def _tables():
    ki = np.zeros(N_LAYERS, dtype=np.uint64)
    wi = np.zeros(N_LAYERS)
    fi = np.zeros(N_LAYERS)
    dn = tn = R
    q = VOLUME / math.exp(-0.5 * dn * dn)
    ki[0] = int((dn / q) * _M)
    ki[1] = 0
    wi[0] = q / _M
    wi[N_LAYERS - 1] = dn / _M
    fi[0] = 1.0
    fi[N_LAYERS - 1] = math.exp(-0.5 * dn * dn)
    for i in range(N_LAYERS - 2, 0, -1):
        dn = math.sqrt(-2.0 * math.log(VOLUME / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = int((dn / tn) * _M)
        tn = dn
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / _M
    for arr in (ki, wi, fi):
        arr.setflags(write=False)
    return ki, wi, fi


KI, WI, FI = _tables()
