# CKA package

from src.cka.similarity import CkaMode, CkaResult, LogitMatrix, cka
from src.cka.trace import CkaHistory, batch_cka_trace, trace_gaps, write_trace

__all__ = [
    'CkaMode',
    'CkaResult',
    'LogitMatrix',
    'cka',
    'CkaHistory',
    'batch_cka_trace',
    'trace_gaps',
    'write_trace',
]
