# supported file formats
import logging

logger = logging.getLogger(__name__)


def get_format(path, **kwargs):
    """get the format for the file at path, None if unknown"""

    from .mtf import MemoryTrace
    from .prv import FoldedTrace

    for format in [MemoryTrace, FoldedTrace]:
        ds = format(path, **kwargs)
        if ds.validate():
            logger.info("Found valid format %s for %s", format.__name__, path)
            return format
    return None
