#pragma once

// Private include shim so public headers stay free of third-party types.
#include "json.hpp"
