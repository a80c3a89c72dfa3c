package com.shop.inventory;

import com.shop.inventory.model.Item;
import com.shop.inventory.store.ItemRepository;
import com.shop.inventory.store.Warehouse;

public class Inventory {
    private final ItemRepository repository = new ItemRepository();
    private final Warehouse mainWarehouse = new Warehouse("MAIN");

    public void register(Item item, int quantity) {
        repository.save(item);
        mainWarehouse.receive(item, quantity);
    }

    public boolean lowOnStock(String sku) {
        return mainWarehouse.needsReorder(sku);
    }
}
