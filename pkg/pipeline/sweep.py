import asyncio
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


async def _gather(fn: Callable[[T], R], items: list[T], workers: int, bar: tqdm) -> list[R]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, fn, item) for item in items]
        for future in futures:
            future.add_done_callback(lambda _: bar.update(1))
        return await asyncio.gather(*futures)


def run_sweep(fn: Callable[[T], R], items: Iterable[T], workers: int = 1, progress: bool = False,
              desc: str = "sweep") -> list[R]:
    """
    Applies fn to every item, in worker processes when workers > 1.

    Workers share nothing; fn and the items must be picklable (module-level functions or
    functools.partial of them). Results come back in input order.

    Args:
        fn (Callable): The job.
        items (Iterable): Job inputs.
        workers (int): Process count; 1 runs in-process.
        progress (bool): Show a tqdm bar.
        desc (str): Bar label.

    Returns:
        list: fn(item) for every item, in order.
    """
    items = list(items)
    with tqdm(total=len(items), desc=desc, disable=not progress, leave=False) as bar:
        if workers <= 1 or len(items) <= 1:
            results = []
            for item in items:
                results.append(fn(item))
                bar.update(1)
            return results
        return asyncio.run(_gather(fn, items, min(workers, len(items)), bar))
