#include "d123/log/modality.hpp"

#include "d123/log/records.hpp"
#include "d123/error.hpp"

namespace d123 {

std::string_view to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::ego_state: return "ego_state";
    case ModalityKind::boxes: return "boxes";
    case ModalityKind::traffic_lights: return "traffic_lights";
    case ModalityKind::camera: return "camera";
    case ModalityKind::lidar: return "lidar";
  }
  return "unknown";
}

std::optional<ModalityKey> ModalityKey::parse(std::string_view name) {
  if (name == "ego_state") return ego_state();
  if (name == "boxes") return boxes();
  if (name == "traffic_lights") return traffic_lights();
  if (name.starts_with("camera_") && name.size() > 7) return camera(std::string(name.substr(7)));
  if (name.starts_with("lidar_") && name.size() > 6) return lidar(std::string(name.substr(6)));
  return std::nullopt;
}

std::string ModalityKey::name() const {
  std::string out(to_string(kind));
  if (is_sensor()) out += "_" + sensor_id;
  return out;
}

std::string_view to_string(TrafficLightState state) {
  switch (state) {
    case TrafficLightState::red: return "red";
    case TrafficLightState::yellow: return "yellow";
    case TrafficLightState::green: return "green";
    case TrafficLightState::off: return "off";
    case TrafficLightState::unknown: return "unknown";
  }
  return "unknown";
}

TrafficLightState traffic_light_state_from_string(std::string_view name) {
  for (auto s : {TrafficLightState::red, TrafficLightState::yellow, TrafficLightState::green, TrafficLightState::off,
                 TrafficLightState::unknown}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::invalid_argument, "unknown traffic light state '" + std::string(name) + "'");
}

std::size_t EventStream::size() const {
  return std::visit([](const auto& rows) { return rows.size(); }, rows);
}

std::vector<TimePoint> EventStream::timestamps() const {
  return std::visit(
      [](const auto& rows) {
        std::vector<TimePoint> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(event_time(r));
        return out;
      },
      rows);
}

}  // namespace d123
