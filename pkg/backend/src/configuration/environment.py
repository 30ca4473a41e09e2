import os
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
APPLICATION_NAME = os.getenv("APPLICATION_NAME", "msr-gan")
MSR_OUTPUT_DIR = os.getenv("MSR_OUTPUT_DIR", "runs")

msr_threads = os.getenv("MSR_THREADS")
MSR_THREADS: int = int(msr_threads) if msr_threads else 1

if MSR_THREADS < 1:
  raise ValueError("MSR_THREADS must be at least 1, did you set the environment variable correctly?")

assert LOG_LEVEL, "LOG_LEVEL is not set"
assert APPLICATION_NAME, "APPLICATION_NAME is not set"
